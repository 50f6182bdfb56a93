#include "rarekg/term_id.hpp"

#include <algorithm>
#include <cctype>

#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

std::string_view to_string(Namespace ns) {
  switch (ns) {
    case Namespace::HP: return "HP";
    case Namespace::ORPHA: return "ORPHA";
    case Namespace::OMIM: return "OMIM";
  }
  return "?";
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

std::string_view TermId::local_id() const noexcept {
  auto colon = text_.find(':');
  return colon == std::string::npos ? std::string_view{} : std::string_view(text_).substr(colon + 1);
}

std::optional<TermId> TermId::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto prefix = text.substr(0, colon);
  auto local = text.substr(colon + 1);
  if (!all_digits(local)) return std::nullopt;
  if (prefix == "HP") {
    if (local.size() != 7) return std::nullopt;
    return TermId(Namespace::HP, std::string(text));
  }
  if (prefix != "ORPHA" && prefix != "OMIM") return std::nullopt;
  if (local.size() > 1 && local.front() == '0') return std::nullopt;
  if (local.size() > 12) return std::nullopt;
  return TermId(prefix == "ORPHA" ? Namespace::ORPHA : Namespace::OMIM, std::string(text));
}

std::optional<TermId> TermId::parse_lenient(std::string_view text) {
  text = detail::trim(text);
  if (auto t = parse(text)) return t;
  auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  std::string prefix = detail::to_upper(text.substr(0, colon));
  std::string_view local = text.substr(colon + 1);
  if (!all_digits(local)) return std::nullopt;
  while (local.size() > 1 && local.front() == '0' && prefix != "HP") local.remove_prefix(1);
  if (prefix == "ORPHANET" || prefix == "ORPHA") return parse("ORPHA:" + std::string(local));
  if (prefix == "MIM" || prefix == "OMIM") return parse("OMIM:" + std::string(local));
  if (prefix == "HP" || prefix == "HPO") return parse("HP:" + std::string(local));
  return std::nullopt;
}

TermId TermId::from(std::string_view text) {
  if (auto t = parse(text)) return *t;
  throw Error(ErrorCode::InvalidArgument, "not a canonical term id: '" + std::string(text) + "'");
}

} // namespace rarekg
