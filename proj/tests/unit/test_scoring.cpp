#include <gtest/gtest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/mock_gateway.hpp"
#include "core/scoring.hpp"
#include "support/fixtures.hpp"

using namespace mt2ie;
using namespace mt2ie::scoring;
using nlohmann::json;

namespace {

MockGateway mllm(const json& script) {
  return MockGateway(fixtures::mock_endpoint(EndpointKind::kMllm, "inline"), MockScript::from_json(script));
}

ImageArtifact tiny_image() {
  std::vector<std::uint8_t> rgb(2 * 2 * 3, 128);
  return ImageArtifact::from_png(encode_png_rgb(2, 2, rgb), "x");
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kUndefined;
}

McQuestion yes_no(const std::string& q, const std::string& element) { return {q, {"yes", "no"}, "yes", element}; }

}  // namespace

TEST(VqaScore, QuestionWrapsThePrompt) {
  EXPECT_EQ(vqascore_question("a cat"), "Does this figure show a cat. Please answer yes or no.");
}

TEST(VqaScore, NormalizesYesAgainstNo) {
  EXPECT_NEAR(normalized_yes_probability({{"Yes", std::log(0.9)}, {"No", std::log(0.1)}}), 0.9, 1e-12);
  // Case variants pool into their sets.
  EXPECT_NEAR(normalized_yes_probability({{"Yes", std::log(0.3)}, {"yes", std::log(0.3)}, {"No", std::log(0.2)},
                                          {"no", std::log(0.2)}}),
              0.6, 1e-12);
  EXPECT_DOUBLE_EQ(normalized_yes_probability({{"Yes", -0.5}, {"No", kMissingLogprob}}), 1.0);
  // Very small log-probabilities survive the max shift.
  EXPECT_NEAR(normalized_yes_probability({{"Yes", -1000.0}, {"No", -1000.0 + std::log(3.0)}}), 0.25, 1e-12);
}

TEST(VqaScore, NoMassIsMalformed) {
  EXPECT_EQ(code_of([] { normalized_yes_probability({{"Yes", kMissingLogprob}, {"No", kMissingLogprob}}); }),
            ErrorCode::kMalformedReply);
  EXPECT_EQ(code_of([] { normalized_yes_probability({}); }), ErrorCode::kMalformedReply);
}

TEST(VqaScore, UsesFirstTokenLogprobs) {
  auto gw = mllm({{"logprobs", {{"queue", {{{"Yes", std::log(0.9)}, {"No", std::log(0.1)}}}}}}});
  const auto img = tiny_image();
  const auto s = vqascore(gw, img, "a cat");
  EXPECT_NEAR(s.value, 0.9, 1e-12);
  EXPECT_EQ(s.method, Method::kVqaScore);
}

TEST(VqaScore, DegeneratesToYesNoWithoutLogprobs) {
  const auto img = tiny_image();
  auto yes = mllm({{"logprobs", {{"supported", false}}}, {"chat", {{"rules", {{{"when", "figure"}, {"replies", {"Yes."}}}}}}}});
  const auto s = vqascore(yes, img, "a cat");
  EXPECT_DOUBLE_EQ(s.value, 1.0);
  EXPECT_EQ(s.method, Method::kDegenerate);
  auto no = mllm({{"logprobs", {{"supported", false}}}, {"chat", {{"rules", {{{"when", "figure"}, {"replies", {"no"}}}}}}}});
  EXPECT_DOUBLE_EQ(vqascore(no, img, "a cat").value, 0.0);
  auto odd = mllm({{"logprobs", {{"supported", false}}}, {"chat", {{"rules", {{{"when", "figure"}, {"replies", {"maybe"}}}}}}}});
  EXPECT_EQ(code_of([&] { vqascore(odd, img, "a cat"); }), ErrorCode::kMalformedReply);
}

TEST(McqParsing, RedCrabExampleYieldsFourQuestions) {
  const auto parsed = parse_mcq_block(fixtures::red_crab_block());
  ASSERT_EQ(parsed.questions.size(), 4u);
  EXPECT_EQ(parsed.warnings, 0);
  const auto& q = parsed.questions;
  EXPECT_EQ(q[0].question, "Is there a crab in the image?");
  EXPECT_EQ(q[0].choices, (std::vector<std::string>{"yes", "no"}));
  EXPECT_EQ(q[0].answer, "yes");
  EXPECT_EQ(q[0].element, "a crab");
  EXPECT_EQ(q[1].choices, (std::vector<std::string>{"lobster", "fish", "crab", "eel"}));
  EXPECT_EQ(q[1].answer, "crab");
  EXPECT_EQ(q[2].element, "a drawing");
  EXPECT_EQ(q[3].answer, "red");
  EXPECT_EQ(q[3].element, "red");
}

TEST(McqParsing, SerializationRoundTrips) {
  const auto parsed = parse_mcq_block(fixtures::red_crab_block());
  const auto text = serialize_mcq(parsed.questions);
  const auto again = parse_mcq_block(text);
  EXPECT_EQ(again.questions, parsed.questions);
  EXPECT_EQ(again.warnings, 0);
}

TEST(McqParsing, DropsBlocksThatBreakInvariants) {
  const std::string raw =
      "Q: one choice only?\nChoices: yes\nA: yes\n"
      "Q: answer not a choice?\nChoices: red, blue\nA: green\n"
      "Q: duplicate choices?\nChoices: Red, red.\nA: red\n"
      "Q: too many?\nChoices: a, b, c, d, e\nA: a\n"
      "Q: no answer?\nChoices: yes, no\n"
      "Q: What color is the kite?\nChoices: red, blue\nA: Blue\nElement: a blue kite\n";
  const auto parsed = parse_mcq_block(raw);
  ASSERT_EQ(parsed.questions.size(), 1u);
  EXPECT_EQ(parsed.warnings, 5);
  EXPECT_EQ(parsed.questions[0].answer, "blue");
  EXPECT_EQ(parsed.questions[0].element, "a blue kite");
}

TEST(AnswerMatching, ExactThenLongestRun) {
  const std::vector<std::string> choices = {"green", "silver", "white", "red"};
  EXPECT_EQ(match_answer("Red.", choices).choice, "red");
  EXPECT_TRUE(match_answer("Red.", choices).matched);
  EXPECT_EQ(match_answer("The handle is red", choices).choice, "red");
  const std::vector<std::string> tools = {"blender", "coffee maker", "cheese grater", "mixer"};
  EXPECT_EQ(match_answer("it looks like a cheese grater to me", tools).choice, "cheese grater");
  // Ties go to the first listed choice.
  EXPECT_EQ(match_answer("coffee or cheese", tools).choice, "coffee maker");
  const auto none = match_answer("no idea", choices);
  EXPECT_FALSE(none.matched);
}

TEST(VqaAccuracy, CountsOnlyValidatedQuestions) {
  auto gw = mllm({{"chat",
                   {{"rules",
                     {{{"when", "Question: Is it raining"}, {"replies", {"no"}}},
                      {{"when", "raining"}, {"replies", {"no"}}},
                      {{"when", "Answer yes or no and state nothing else"}, {"replies", {"yes"}}},
                      {{"when", "Question: Is there a dog"}, {"replies", {"yes"}}},
                      {{"when", "Question: Is there a ball"}, {"replies", {"no"}}}}},
                    {"default", "none"}}}});
  const auto img = tiny_image();
  const std::vector<McQuestion> qs = {yes_no("Is there a dog?", "a dog"), yes_no("Is there a ball?", "a ball"),
                                      yes_no("Is it raining?", "rain")};
  const auto s = vqa_accuracy(gw, img, "a dog with a ball", qs);
  EXPECT_EQ(s.method, Method::kVqaAccuracy);
  EXPECT_DOUBLE_EQ(s.value, 0.5);
  ASSERT_EQ(s.detail.size(), 3u);
  EXPECT_TRUE(s.detail[0].correct);
  EXPECT_FALSE(s.detail[1].correct);
  EXPECT_FALSE(s.detail[2].validated);
  EXPECT_FALSE(s.detail[2].given.has_value());
}

TEST(VqaAccuracy, NothingValidatedIsUndefined) {
  auto gw = mllm({{"chat", {{"rules", {{{"when", "Answer yes or no"}, {"replies", {"no"}}}}}, {"default", "none"}}}});
  const auto img = tiny_image();
  EXPECT_EQ(code_of([&] { vqa_accuracy(gw, img, "p", {yes_no("Is there a dog?", "a dog")}); }),
            ErrorCode::kUndefined);
}

TEST(VqaAccuracy, GeneratedQuestionsFromTheScriptedMock) {
  MockGateway gw(fixtures::mock_endpoint(EndpointKind::kMllm, "scripted"), MockScript::load("scripted"));
  const auto parsed = generate_questions(gw, "a red kite");
  ASSERT_EQ(parsed.questions.size(), 2u);
  EXPECT_EQ(parsed.questions[0].question, "Does the image show a red kite?");
  EXPECT_EQ(parsed.questions[0].element, "a red kite");
  const auto img = tiny_image();
  EXPECT_DOUBLE_EQ(vqa_accuracy(gw, img, "a red kite", parsed.questions).value, 1.0);
}

TEST(VqaAccuracy, UnparseableGenerationIsParseError) {
  auto gw = mllm({{"chat", {{"default", "echo"}}}});
  EXPECT_EQ(code_of([&] { generate_questions(gw, "a red kite"); }), ErrorCode::kParse);
}

TEST(Aesthetic, ParsesAndClamps) {
  const auto img = tiny_image();
  auto plain = mllm({{"chat", {{"rules", {{{"when", "Score this image"}, {"replies", {"Score: 7.5/10"}}}}}}}});
  EXPECT_DOUBLE_EQ(aesthetic_score(plain, img).value, 7.5);
  auto high = mllm({{"chat", {{"rules", {{{"when", "Score this image"}, {"replies", {"12"}}}}}}}});
  EXPECT_DOUBLE_EQ(aesthetic_score(high, img).value, 10.0);
}

TEST(Aesthetic, ReasksOnceThenFails) {
  const auto img = tiny_image();
  auto second = mllm({{"chat", {{"rules", {{{"when", "Score this image"}, {"replies", {"lovely", "6"}}}}}}}});
  EXPECT_DOUBLE_EQ(aesthetic_score(second, img).value, 6.0);
  EXPECT_EQ(second.calls("chat"), 2);
  auto never = mllm({{"chat", {{"rules", {{{"when", "Score this image"}, {"replies", {"lovely"}}}}}}}});
  EXPECT_EQ(code_of([&] { aesthetic_score(never, img); }), ErrorCode::kParse);
}

TEST(Aesthetic, FirstNumber) {
  EXPECT_EQ(first_number("about 8 out of 10"), 8.0);
  EXPECT_EQ(first_number("-1.5"), -1.5);
  EXPECT_FALSE(first_number("none").has_value());
}

TEST(Scoring, QuestionsToJsonl) {
  const auto parsed = parse_mcq_block(fixtures::red_crab_block());
  const auto out = questions_to_jsonl("a drawing of a red crab", parsed.questions);
  std::istringstream in(out);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j["prompt"], "a drawing of a red crab");
    EXPECT_EQ(j["question"], parsed.questions[n].question);
    ++n;
  }
  EXPECT_EQ(n, 4);
}

TEST(Scoring, MethodNames) {
  for (auto m : {Method::kVqaScore, Method::kVqaAccuracy, Method::kDegenerate}) {
    EXPECT_EQ(method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(method_from_string("clip"), Error);
}
