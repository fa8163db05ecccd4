#include "maple/perception/perception.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "maple/util/base64.hpp"
#include "maple/util/hash.hpp"
#include "maple/util/text.hpp"

namespace maple::perception {

namespace {

void sort_elements(std::vector<ScreenElement>& elements) {
  std::stable_sort(elements.begin(), elements.end(),
                   [](const ScreenElement& a, const ScreenElement& b) {
                     if (a.top != b.top) return a.top < b.top;
                     return a.left < b.left;
                   });
}

}  // namespace

PerceptionResult MockPerceiver::perceive(const std::string& screenshot) {
  // Expected shape: "P5\n# <app>/<screen>\n...".
  if (screenshot.compare(0, 3, "P5\n") != 0) throw BadImageError("not a P5 image");
  const auto comment_end = screenshot.find('\n', 3);
  if (comment_end == std::string::npos || screenshot[3] != '#') {
    throw BadImageError("missing screen identity comment");
  }
  const std::string ident = util::trim(screenshot.substr(4, comment_end - 4));
  const auto slash = ident.find('/');
  if (slash == std::string::npos) throw BadImageError("malformed identity " + ident);
  const std::string app = ident.substr(0, slash);
  const std::string screen_id = ident.substr(slash + 1);

  PerceptionResult result;
  result.width = world_.width();
  result.height = world_.height();
  result.source = "mock";
  result.screenshot_ref = util::digest_hex(screenshot);
  const std::vector<sim::SimElement>* elements = nullptr;
  if (app == sim::kLauncher) {
    elements = &world_.launcher_icons();
  } else {
    elements = &world_.screen_script(app, screen_id).elements;
  }
  for (const auto& el : *elements) {
    ScreenElement out;
    out.kind = el.kind;
    out.content = el.content;
    out.left = el.bounds.left;
    out.top = el.bounds.top;
    out.right = el.bounds.right;
    out.bottom = el.bounds.bottom;
    out.cx = el.bounds.cx();
    out.cy = el.bounds.cy();
    out.confidence = 1.0;
    result.elements.push_back(std::move(out));
  }
  sort_elements(result.elements);
  return result;
}

ServicePerceiver::ServicePerceiver(std::shared_ptr<gateway::HttpTransport> transport,
                                   std::string host, std::string path)
    : transport_(std::move(transport)), host_(std::move(host)), path_(std::move(path)) {}

PerceptionResult ServicePerceiver::perceive(const std::string& screenshot) {
  if (screenshot.empty()) throw BadImageError("empty screenshot");
  const nlohmann::json request{{"image_b64", util::base64_encode(screenshot)},
                               {"media_type", "image/x-portable-graymap"}};
  gateway::HttpResponse http;
  try {
    http = transport_->post(host_, path_, {}, request.dump(), "application/json");
  } catch (const std::exception& e) {
    throw ServiceUnavailableError(e.what());
  }
  if (http.status < 200 || http.status >= 300) {
    throw ServiceUnavailableError("HTTP " + std::to_string(http.status));
  }
  const auto doc = nlohmann::json::parse(http.body, nullptr, false);
  if (doc.is_discarded()) throw ServiceUnavailableError("reply is not JSON");

  PerceptionResult result;
  result.source = "service";
  result.screenshot_ref = util::digest_hex(screenshot);
  if (doc.contains("screen_size") && doc["screen_size"].is_array()) {
    result.width = doc["screen_size"][0].get<int>();
    result.height = doc["screen_size"][1].get<int>();
  }
  for (const auto& edoc : doc.value("elements", nlohmann::json::array())) {
    ScreenElement el;
    el.kind = edoc.value("kind", "text");
    el.content = edoc.value("content", "");
    const auto& b = edoc.at("bounds");
    el.left = b[0].get<int>();
    el.top = b[1].get<int>();
    el.right = b[2].get<int>();
    el.bottom = b[3].get<int>();
    if (edoc.contains("center")) {
      el.cx = edoc["center"][0].get<int>();
      el.cy = edoc["center"][1].get<int>();
    } else {
      el.cx = (el.left + el.right) / 2;
      el.cy = (el.top + el.bottom) / 2;
    }
    el.confidence = edoc.value("confidence", 1.0);
    result.elements.push_back(std::move(el));
  }
  sort_elements(result.elements);
  return result;
}

std::optional<ScreenElement> locate(const PerceptionResult& p, const std::string& query) {
  for (const auto& el : p.elements) {
    if (util::iequals(el.content, query)) return el;
  }
  std::optional<ScreenElement> best;
  for (const auto& el : p.elements) {
    if (!util::icontains(el.content, query) && !util::icontains(query, el.content)) {
      continue;
    }
    if (!best || el.confidence > best->confidence) best = el;
  }
  return best;
}

}  // namespace maple::perception
