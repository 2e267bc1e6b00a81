#include "cwi/language.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "cwi/error.hpp"

namespace cwi {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Language language) {
  switch (language) {
    case Language::kEN: return "EN";
    case Language::kDE: return "DE";
    case Language::kES: return "ES";
    case Language::kFR: return "FR";
    case Language::kMixed: return "Mixed";
  }
  return "?";
}

std::string_view to_string(Genre genre) {
  switch (genre) {
    case Genre::kWikipedia: return "Wikipedia";
    case Genre::kWikiNews: return "WikiNews";
    case Genre::kNews: return "News";
    case Genre::kMixed: return "Mixed";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(Target target) {
  switch (target) {
    case Target::kEnWikipedia: return "EN-W";
    case Target::kEnWikiNews: return "EN-WN";
    case Target::kEnNews: return "EN-N";
    case Target::kDE: return "DE";
    case Target::kES: return "ES";
    case Target::kFR: return "FR";
  }
  return "?";
}

Language parse_language(std::string_view text) {
  const std::string t = lower(text);
  if (t == "en" || t == "english") return Language::kEN;
  if (t == "de" || t == "german") return Language::kDE;
  if (t == "es" || t == "spanish") return Language::kES;
  if (t == "fr" || t == "french") return Language::kFR;
  if (t == "mixed") return Language::kMixed;
  throw ParseError("unknown language '" + std::string(text) + "'");
}

Genre parse_genre(std::string_view text) {
  const std::string t = lower(text);
  if (t == "wikipedia") return Genre::kWikipedia;
  if (t == "wikinews") return Genre::kWikiNews;
  if (t == "news") return Genre::kNews;
  if (t == "mixed") return Genre::kMixed;
  throw ParseError("unknown genre '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  const std::string t = lower(text);
  if (t == "train") return Split::kTrain;
  if (t == "dev") return Split::kDev;
  if (t == "test") return Split::kTest;
  throw ParseError("unknown split '" + std::string(text) + "'");
}

Target parse_target(std::string_view text) {
  const std::string t = lower(text);
  if (t == "en-w") return Target::kEnWikipedia;
  if (t == "en-wn") return Target::kEnWikiNews;
  if (t == "en-n") return Target::kEnNews;
  if (t == "de") return Target::kDE;
  if (t == "es") return Target::kES;
  if (t == "fr") return Target::kFR;
  throw ParseError("unknown target '" + std::string(text) + "'");
}

Language language_of(Target target) {
  switch (target) {
    case Target::kEnWikipedia:
    case Target::kEnWikiNews:
    case Target::kEnNews: return Language::kEN;
    case Target::kDE: return Language::kDE;
    case Target::kES: return Language::kES;
    case Target::kFR: return Language::kFR;
  }
  return Language::kMixed;
}

Genre genre_of(Target target) {
  switch (target) {
    case Target::kEnWikiNews: return Genre::kWikiNews;
    case Target::kEnNews: return Genre::kNews;
    default: return Genre::kWikipedia;
  }
}

std::string_view collection_name(Target target) {
  switch (target) {
    case Target::kEnWikipedia: return "Wikipedia";
    case Target::kEnWikiNews: return "WikiNews";
    case Target::kEnNews: return "News";
    case Target::kDE: return "German";
    case Target::kES: return "Spanish";
    case Target::kFR: return "French";
  }
  return "?";
}

}  // namespace cwi
