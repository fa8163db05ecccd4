#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace maple::gateway {

struct MalformedResponseError : std::runtime_error {
  explicit MalformedResponseError(const std::string& detail)
      : std::runtime_error("malformed response: " + detail) {}
};

struct Section {
  std::string title;
  std::string body;
};

// Ordered "### Title ###" sections of a model reply.
class SectionedResponse {
 public:
  void add(std::string title, std::string body);

  bool has(const std::string& title) const;
  std::optional<std::string> get(const std::string& title) const;
  // Throws MalformedResponseError naming the missing section.
  const std::string& require(const std::string& title) const;

  const std::vector<Section>& sections() const { return sections_; }
  bool empty() const { return sections_.empty(); }

 private:
  std::vector<Section> sections_;
};

// Text before the first header is ignored; bodies are trimmed of surrounding
// blank lines. A reply with no headers parses to an empty response.
SectionedResponse parse_sections(const std::string& text);

// Order-insensitive; surplus sections are preserved. Throws
// MalformedResponseError listing every absent required header at once.
SectionedResponse parse_sections(const std::string& text,
                                 const std::vector<std::string>& required);

std::string serialize_sections(const SectionedResponse& resp);

}  // namespace maple::gateway
