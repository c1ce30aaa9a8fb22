#include <doctest.h>

#include <string>
#include <vector>

#include "phasedet/error.hpp"
#include "phasedet/rng.hpp"
#include "phasedet/timeline.hpp"

using namespace phasedet;

namespace {

// Rectangles inside one <g class="ribbon"> block.
std::size_t rects_in_ribbon(const std::string& svg, const std::string& row_name) {
  const std::string marker = "data-row=\"" + row_name + "\"";
  const std::size_t start = svg.find(marker);
  REQUIRE(start != std::string::npos);
  const std::size_t end = svg.find("</g>", start);
  std::size_t count = 0;
  std::size_t pos = start;
  while ((pos = svg.find("<rect", pos)) != std::string::npos && pos < end) {
    ++count;
    ++pos;
  }
  return count;
}

std::size_t count_runs(const std::vector<int>& labels) {
  std::size_t runs = 1;
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (labels[t] != labels[t - 1]) ++runs;
  }
  return runs;
}

}  // namespace

TEST_CASE("timeline renders one rectangle per label run") {
  const std::vector<int> truth = {0, 0, 1};
  const auto svg = render_timeline_svg(truth, {{"pred", {0, 1, 1}}});
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(rects_in_ribbon(svg, "ground truth") == 2);
  CHECK(rects_in_ribbon(svg, "pred") == 2);
}

TEST_CASE("single-phase sequence spans the full ribbon") {
  const std::vector<int> truth = {3, 3, 3, 3};
  const auto svg = render_timeline_svg(truth, {});
  CHECK(rects_in_ribbon(svg, "ground truth") == 1);
  CHECK(svg.find("width=\"900.00\"") != std::string::npos);
}

TEST_CASE("ribbons appear in order: truth then named rows") {
  const std::vector<int> truth = {0, 1, 2};
  const auto svg = render_timeline_svg(
      truth, {{"row1", {0, 0, 0}}, {"row2", {1, 1, 1}}, {"row3", {2, 2, 2}}});
  const auto p0 = svg.find("data-row=\"ground truth\"");
  const auto p1 = svg.find("data-row=\"row1\"");
  const auto p2 = svg.find("data-row=\"row2\"");
  const auto p3 = svg.find("data-row=\"row3\"");
  REQUIRE(p0 != std::string::npos);
  CHECK(p0 < p1);
  CHECK(p1 < p2);
  CHECK(p2 < p3);
}

TEST_CASE("timeline validates its input") {
  CHECK_THROWS_AS(render_timeline_svg({}, {}), DataError);
  CHECK_THROWS_AS(render_timeline_svg({0, 1}, {{"short", {0}}}), DataError);
  CHECK_THROWS_AS(render_timeline_svg({0, 9}, {}), DataError);
}

TEST_CASE("rectangle counts equal run counts on random sequences") {
  Rng rng(9090);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(400);
    std::vector<int> truth(n), pred(n);
    int a = 0, b = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (rng.bernoulli(0.1) && a < 6) ++a;
      if (rng.bernoulli(0.1) && b < 6) ++b;
      truth[t] = a;
      pred[t] = b;
    }
    const auto svg = render_timeline_svg(truth, {{"pred", pred}});
    REQUIRE(rects_in_ribbon(svg, "ground truth") == count_runs(truth));
    REQUIRE(rects_in_ribbon(svg, "pred") == count_runs(pred));
  }
}

TEST_CASE("legend names every phase and the axis is in minutes") {
  const std::vector<int> truth(600, 0);
  const auto svg = render_timeline_svg(truth, {});
  CHECK(svg.find("Trocar placement") != std::string::npos);
  CHECK(svg.find("Closing") != std::string::npos);
  CHECK(svg.find(">min<") != std::string::npos);
  CHECK(svg.find(">10<") != std::string::npos);  // 600 s = 10 min tick
}

TEST_CASE("rendering is deterministic") {
  const std::vector<int> truth = {0, 0, 1, 2, 2, 3};
  const auto a = render_timeline_svg(truth, {{"p", {0, 1, 1, 2, 3, 3}}});
  const auto b = render_timeline_svg(truth, {{"p", {0, 1, 1, 2, 3, 3}}});
  CHECK(a == b);
}
