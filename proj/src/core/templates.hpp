#pragma once

#include <string>
#include <string_view>
#include <vector>

// Prompt templates shipped as plain-text assets under assets/templates and
// compiled into the library. Ids are the asset file names without extension.
namespace mt2ie::templates {

inline constexpr std::string_view kIterative = "iterative";
inline constexpr std::string_view kSeed = "seed";
inline constexpr std::string_view kAestheticSystem = "aesthetic-system";
inline constexpr std::string_view kAestheticUser = "aesthetic-user";

// Template text without the asset's trailing newline. Throws Error{kConfig}
// for unknown ids.
std::string_view text(std::string_view id);
std::vector<std::string> ids();

// SHA-256 of the asset file bytes, as recorded in assets/templates/DIGESTS.
std::string recorded_digest(std::string_view id);
// SHA-256 of the compiled-in copy (text + trailing newline).
std::string embedded_digest(std::string_view id);

// Question generation/validation pair used by GQA scoring.
struct QuestionTemplates {
  std::string generate;
  std::string validate;
};

// Known sets: "llava" (default, few-shot), "molmo", "llama".
QuestionTemplates question_set(std::string_view set_id);
std::vector<std::string> question_set_ids();

namespace detail {
struct Asset {
  std::string_view id;
  std::string_view content;
};
const std::vector<Asset>& assets();
std::string_view digest_manifest();
}  // namespace detail

}  // namespace mt2ie::templates
