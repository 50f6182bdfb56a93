#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace rarekg {

enum class Namespace { HP, ORPHA, OMIM };

std::string_view to_string(Namespace ns);

// An ontology identifier such as HP:0001250, ORPHA:905 or OMIM:277900.
// HP local ids are seven zero-padded digits; ORPHA/OMIM local ids are plain
// integers without leading zeros. Ordering and equality follow the canonical
// rendering.
class TermId {
public:
  TermId() = default;

  // Strict parse of the canonical rendering. Returns nullopt on anything else.
  static std::optional<TermId> parse(std::string_view text);
  // Like parse() but also accepts "Orphanet:" / "ORPHANET:" / "MIM:" prefixes
  // and surrounding whitespace, as seen in third-party payloads.
  static std::optional<TermId> parse_lenient(std::string_view text);
  // Throws Error(InvalidArgument) when text is not canonical.
  static TermId from(std::string_view text);

  Namespace ns() const noexcept { return ns_; }
  std::string_view local_id() const noexcept;
  const std::string& str() const noexcept { return text_; }
  bool is_disease() const noexcept { return ns_ == Namespace::ORPHA || ns_ == Namespace::OMIM; }

  friend bool operator==(const TermId& a, const TermId& b) noexcept { return a.text_ == b.text_; }
  friend std::strong_ordering operator<=>(const TermId& a, const TermId& b) noexcept {
    return a.text_.compare(b.text_) <=> 0;
  }

private:
  TermId(Namespace ns, std::string text) : ns_(ns), text_(std::move(text)) {}

  Namespace ns_ = Namespace::HP;
  std::string text_;
};

} // namespace rarekg

template <>
struct std::hash<rarekg::TermId> {
  std::size_t operator()(const rarekg::TermId& t) const noexcept { return std::hash<std::string>{}(t.str()); }
};
