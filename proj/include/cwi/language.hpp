#ifndef CWI_LANGUAGE_HPP
#define CWI_LANGUAGE_HPP

#include <array>
#include <string>
#include <string_view>

namespace cwi {

enum class Language { kEN, kDE, kES, kFR, kMixed };
enum class Genre { kWikipedia, kWikiNews, kNews, kMixed };
enum class Split { kTrain, kDev, kTest };

// Evaluation columns. English is evaluated per genre; the others have one
// collection each.
enum class Target { kEnWikipedia, kEnWikiNews, kEnNews, kDE, kES, kFR };

inline constexpr std::array<Language, 4> kAllLanguages = {
    Language::kEN, Language::kDE, Language::kES, Language::kFR};
inline constexpr std::array<Target, 6> kAllTargets = {
    Target::kEnWikipedia, Target::kEnWikiNews, Target::kEnNews,
    Target::kDE,          Target::kES,         Target::kFR};

std::string_view to_string(Language language);
std::string_view to_string(Genre genre);
std::string_view to_string(Split split);
std::string_view to_string(Target target);

// Parsers accept the canonical names above, case-insensitively, plus common
// long forms ("english", "German", "wikinews", "Train"). Throw ParseError.
Language parse_language(std::string_view text);
Genre parse_genre(std::string_view text);
Split parse_split(std::string_view text);
Target parse_target(std::string_view text);

Language language_of(Target target);
Genre genre_of(Target target);

// File-name stem of the shared-task release ("News", "German", ...).
std::string_view collection_name(Target target);

}  // namespace cwi

#endif  // CWI_LANGUAGE_HPP
