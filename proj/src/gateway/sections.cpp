#include "maple/gateway/sections.hpp"

#include <sstream>

#include "maple/util/text.hpp"

namespace maple::gateway {

namespace {

// "### Title ###" with optional surrounding whitespace; returns the title.
std::optional<std::string> match_header(const std::string& line) {
  const std::string t = util::trim(line);
  if (t.size() < 7) return std::nullopt;
  if (t.compare(0, 3, "###") != 0) return std::nullopt;
  if (t.compare(t.size() - 3, 3, "###") != 0) return std::nullopt;
  std::string title = util::trim(t.substr(3, t.size() - 6));
  if (title.empty()) return std::nullopt;
  return title;
}

std::string trim_blank_edges(const std::vector<std::string>& lines) {
  std::size_t lo = 0;
  std::size_t hi = lines.size();
  while (lo < hi && util::trim(lines[lo]).empty()) ++lo;
  while (hi > lo && util::trim(lines[hi - 1]).empty()) --hi;
  std::string out;
  for (std::size_t i = lo; i < hi; ++i) {
    if (i > lo) out += '\n';
    out += lines[i];
  }
  return out;
}

}  // namespace

void SectionedResponse::add(std::string title, std::string body) {
  sections_.push_back(Section{std::move(title), std::move(body)});
}

bool SectionedResponse::has(const std::string& title) const {
  return get(title).has_value();
}

std::optional<std::string> SectionedResponse::get(const std::string& title) const {
  for (const auto& s : sections_) {
    if (s.title == title) return s.body;
  }
  return std::nullopt;
}

const std::string& SectionedResponse::require(const std::string& title) const {
  for (const auto& s : sections_) {
    if (s.title == title) return s.body;
  }
  throw MalformedResponseError("missing section '" + title + "'");
}

SectionedResponse parse_sections(const std::string& text) {
  SectionedResponse resp;
  std::optional<std::string> open_title;
  std::vector<std::string> body;
  const auto flush = [&] {
    if (open_title) resp.add(*open_title, trim_blank_edges(body));
    body.clear();
  };
  for (const auto& line : util::split_lines(text)) {
    if (auto title = match_header(line)) {
      flush();
      open_title = std::move(title);
    } else if (open_title) {
      body.push_back(line);
    }
  }
  flush();
  return resp;
}

SectionedResponse parse_sections(const std::string& text,
                                 const std::vector<std::string>& required) {
  SectionedResponse resp = parse_sections(text);
  std::string missing;
  for (const auto& title : required) {
    if (!resp.has(title)) {
      if (!missing.empty()) missing += ", ";
      missing += "'" + title + "'";
    }
  }
  if (!missing.empty()) {
    throw MalformedResponseError("missing sections " + missing);
  }
  return resp;
}

std::string serialize_sections(const SectionedResponse& resp) {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : resp.sections()) {
    if (!first) out << "\n";
    first = false;
    out << "### " << s.title << " ###\n" << s.body << "\n";
  }
  return out.str();
}

}  // namespace maple::gateway
