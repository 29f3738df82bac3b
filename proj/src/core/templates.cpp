#include "core/templates.hpp"

#include <algorithm>

#include "core/codec.hpp"
#include "core/error.hpp"
#include "core/text.hpp"

namespace mt2ie::templates {

namespace {

std::string_view raw(std::string_view id) {
  for (const auto& a : detail::assets()) {
    if (a.id == id) return a.content;
  }
  fail(ErrorCode::kConfig, "unknown template id: " + std::string(id));
}

}  // namespace

std::string_view text(std::string_view id) {
  auto content = raw(id);
  if (content.ends_with('\n')) content.remove_suffix(1);
  return content;
}

std::vector<std::string> ids() {
  std::vector<std::string> out;
  for (const auto& a : detail::assets()) out.emplace_back(a.id);
  return out;
}

std::string recorded_digest(std::string_view id) {
  const std::string file = std::string(id) + ".txt";
  for (const auto& line : text::split_lines(detail::digest_manifest())) {
    const auto fields = text::split_ws(line);
    if (fields.size() == 2 && fields[1] == file) return fields[0];
  }
  fail(ErrorCode::kConfig, "no recorded digest for template " + std::string(id));
}

std::string embedded_digest(std::string_view id) { return sha256_hex(raw(id)); }

QuestionTemplates question_set(std::string_view set_id) {
  // The llava set has no validator of its own; it shares the molmo one.
  if (set_id == "llava") return {"qgen-fewshot", "qvalidate-molmo"};
  if (set_id == "molmo") return {"qgen-molmo", "qvalidate-molmo"};
  if (set_id == "llama") return {"qgen-llama", "qvalidate-llama"};
  fail(ErrorCode::kConfig, "unknown template set: " + std::string(set_id));
}

std::vector<std::string> question_set_ids() { return {"llava", "molmo", "llama"}; }

}  // namespace mt2ie::templates
