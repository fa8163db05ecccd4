#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "maple/device/action.hpp"
#include "maple/perception/perception.hpp"
#include "maple/sim/world.hpp"
#include "maple/util/hash.hpp"

using namespace maple;
using nlohmann::json;
using perception::MockPerceiver;
using perception::PerceptionResult;
using perception::ServicePerceiver;

namespace {

const char* kGoldenWorld = MAPLE_SOURCE_DIR "/assets/worlds/golden.json";

// Canned perception service for the wire-schema golden pair.
struct StubTransport : gateway::HttpTransport {
  std::string reply;
  int status = 200;
  bool explode = false;
  json last_request;

  gateway::HttpResponse post(const std::string&, const std::string& path,
                             const std::map<std::string, std::string>&,
                             const std::string& body, const std::string&) override {
    if (explode) throw std::runtime_error("connection refused");
    CHECK(path == "/v1/perceive");
    last_request = json::parse(body);
    return {status, reply};
  }
};

// The documented reply shape: elements may arrive unsorted, with overlapping
// boxes and an optional region field.
const char* kGoldenReply = R"({
  "screen_size": [480, 800],
  "elements": [
    {"kind": "icon", "content": "Cart", "bounds": [380, 300, 440, 360],
     "center": [410, 330], "confidence": 0.93, "region": "toolbar"},
    {"kind": "text", "content": "Add to cart", "bounds": [40, 300, 300, 360],
     "confidence": 0.98},
    {"kind": "text", "content": "Birthday Greeting Card", "bounds": [40, 60, 440, 120],
     "confidence": 0.99}
  ]
})";

}  // namespace

TEST_CASE("mock perceiver returns the declared elements with true centers") {
  sim::World world = sim::World::load(kGoldenWorld);
  world.step(device::OpenApp{"Walmart"});
  const auto render = world.render();

  MockPerceiver mock(world);
  const PerceptionResult p = mock.perceive(render.image);
  CHECK(p.source == "mock");
  CHECK(p.width == 480);
  CHECK(p.height == 800);
  CHECK(p.screenshot_ref == util::digest_hex(render.image));
  REQUIRE(p.elements.size() == 4);
  // Screen-declared geometry is ground truth.
  const auto& declared = world.screen_script("Walmart", "home").elements;
  for (const auto& el : p.elements) {
    bool found = false;
    for (const auto& d : declared) {
      if (d.content == el.content) {
        found = true;
        CHECK(el.cx == d.bounds.cx());
        CHECK(el.cy == d.bounds.cy());
        CHECK(el.left == d.bounds.left);
        CHECK(el.bottom == d.bounds.bottom);
      }
    }
    CHECK(found);
    CHECK(el.left >= 0);
    CHECK(el.right <= p.width);
    CHECK(el.top >= 0);
    CHECK(el.bottom <= p.height);
  }
  // Sorted by (top, left): the Cart icon at top 10 precedes the search bar.
  CHECK(p.elements[0].content == "Cart");
  CHECK(p.elements[1].content == "Search bar");
}

TEST_CASE("mock perceiver is pure in the image bytes") {
  sim::World world = sim::World::load(kGoldenWorld);
  world.step(device::OpenApp{"Notes"});
  const std::string image = world.render().image;
  MockPerceiver mock(world);
  const auto a = mock.perceive(image);
  const auto b = mock.perceive(image);
  CHECK(a.screenshot_ref == b.screenshot_ref);
  REQUIRE(a.elements.size() == b.elements.size());
  for (size_t i = 0; i < a.elements.size(); ++i) {
    CHECK(a.elements[i].content == b.elements[i].content);
    CHECK(a.elements[i].cx == b.elements[i].cx);
  }
}

TEST_CASE("mock perceiver yields an empty list on a blank screen") {
  const json doc = json::parse(R"({
    "apps": [{
      "name": "Bare", "initial": "empty",
      "screens": {"empty": {"beacon": "Empty Screen of Bare", "elements": []}},
      "rules": []
    }]
  })");
  sim::World world = sim::World::from_json(doc);
  world.step(device::OpenApp{"Bare"});
  MockPerceiver mock(world);
  CHECK(mock.perceive(world.render().image).elements.empty());
}

TEST_CASE("mock perceiver rejects foreign bytes") {
  sim::World world = sim::World::load(kGoldenWorld);
  MockPerceiver mock(world);
  CHECK_THROWS_AS(mock.perceive("not a rendered screen"), perception::BadImageError);
  CHECK_THROWS_AS(mock.perceive(""), perception::BadImageError);
}

TEST_CASE("service perceiver round-trips the documented wire schema") {
  auto stub = std::make_shared<StubTransport>();
  stub->reply = kGoldenReply;
  ServicePerceiver svc(stub, "http://localhost:9999");
  const PerceptionResult p = svc.perceive("P5 fake bytes");

  CHECK(stub->last_request.contains("image_b64"));
  CHECK(stub->last_request["media_type"] == "image/x-portable-graymap");

  CHECK(p.source == "service");
  CHECK(p.width == 480);
  REQUIRE(p.elements.size() == 3);
  // Sorted by (top, left); overlapping boxes are both kept.
  CHECK(p.elements[0].content == "Birthday Greeting Card");
  CHECK(p.elements[1].content == "Add to cart");
  CHECK(p.elements[2].content == "Cart");
  CHECK(p.elements[2].cx == 410);
  CHECK(p.elements[1].cx == 170);  // center derived from bounds when absent
  CHECK(p.elements[2].confidence == doctest::Approx(0.93));
}

TEST_CASE("service failures surface as ServiceUnavailable") {
  auto stub = std::make_shared<StubTransport>();
  stub->reply = kGoldenReply;
  stub->status = 503;
  ServicePerceiver svc(stub, "http://localhost:9999");
  CHECK_THROWS_AS(svc.perceive("img"), perception::ServiceUnavailableError);

  stub->status = 200;
  stub->reply = "not json";
  CHECK_THROWS_AS(svc.perceive("img"), perception::ServiceUnavailableError);

  stub->explode = true;
  CHECK_THROWS_AS(svc.perceive("img"), perception::ServiceUnavailableError);

  CHECK_THROWS_AS(svc.perceive(""), perception::BadImageError);
}

TEST_CASE("locate prefers exact matches then confidence") {
  PerceptionResult p;
  p.elements.push_back({"text", "Add to cart", 0, 0, 10, 10, 5, 5, 0.5});
  p.elements.push_back({"text", "cart summary", 0, 20, 10, 30, 5, 25, 0.9});
  p.elements.push_back({"text", "view carts", 0, 40, 10, 50, 5, 45, 0.6});

  const auto exact = perception::locate(p, "ADD TO CART");
  REQUIRE(exact.has_value());
  CHECK(exact->content == "Add to cart");

  // No exact "cart" element: highest-confidence substring match wins.
  const auto sub = perception::locate(p, "cart");
  REQUIRE(sub.has_value());
  CHECK(sub->content == "cart summary");

  CHECK_FALSE(perception::locate(p, "checkout").has_value());
  CHECK_FALSE(perception::locate(PerceptionResult{}, "anything").has_value());
}
