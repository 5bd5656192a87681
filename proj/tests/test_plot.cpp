#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "replab/bench.hpp"
#include "replab/common.hpp"
#include "replab/plot.hpp"

using namespace replab;
namespace fs = std::filesystem;

namespace {

PlotSpec sample_curve() {
  PlotSpec spec;
  spec.title = "returns";
  spec.xlabel = "env steps";
  spec.ylabel = "score";
  PlotSeries a;
  a.label = "ours";
  a.x = {0, 1000, 2000, 3000};
  a.y = {0.1, 0.4, 0.55, 0.7};
  a.band = {0.05, 0.04, 0.03, 0.02};
  PlotSeries b;
  b.label = "base";
  b.x = {0, 1000, 2000, 3000};
  b.y = {0.1, 0.2, 0.3, 0.32};
  spec.series = {a, b};
  return spec;
}

PlotSpec sample_bars() {
  PlotSpec spec;
  spec.title = "C4";
  spec.ylabel = "score";
  spec.bar_labels = {"ours", "base", "ablation"};
  spec.bar_values = {0.7, 0.45, 0.5};
  spec.bar_err = {0.05, 0.08, 0.0};
  return spec;
}

int count(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos;
       p = hay.find(needle, p + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_SUITE("plot") {
  TEST_CASE("tick positions use round steps") {
    CHECK(nice_ticks(0, 10) ==
          std::vector<double>{0, 2, 4, 6, 8, 10});
    std::vector<double> unit = nice_ticks(0, 1);
    REQUIRE(unit.size() == 6);
    CHECK(unit.front() == 0.0);
    CHECK(unit[1] == doctest::Approx(0.2));
    CHECK(unit.back() == doctest::Approx(1.0));
    // covers the range even when lo is not a tick
    std::vector<double> shifted = nice_ticks(0.03, 0.07);
    for (double t : shifted) {
      CHECK(t >= 0.03 - 1e-12);
      CHECK(t <= 0.07 + 1e-12);
    }
    CHECK(shifted.size() >= 4);
    CHECK(nice_ticks(5, 5) == std::vector<double>{5});
    // negative spans still produce a zero tick, not -0
    std::vector<double> neg = nice_ticks(-1, 1);
    bool has_zero = false;
    for (double t : neg)
      if (t == 0.0 && !std::signbit(t)) has_zero = true;
    CHECK(has_zero);
  }

  TEST_CASE("text width matches the fixed-pitch font") {
    CHECK(text_width("") == 0);
    CHECK(text_width("abc") == 18);
    CHECK(text_width("abc", 2) == 36);
  }

  TEST_CASE("rendering is a pure function of the spec") {
    PlotSpec spec = sample_curve();
    Image8 once = render_plot_png(spec);
    Image8 twice = render_plot_png(spec);
    CHECK(once.px == twice.px);
    CHECK(render_plot_svg(spec) == render_plot_svg(spec));

    fs::path dir = fs::temp_directory_path() / "replab_plot_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_plot(spec, (dir / "a").string());
    write_plot(spec, (dir / "b").string());
    CHECK(read_binary_file((dir / "a.png").string()) ==
          read_binary_file((dir / "b.png").string()));
    CHECK(read_text_file((dir / "a.svg").string()) ==
          read_text_file((dir / "b.svg").string()));
    fs::remove_all(dir);
  }

  TEST_CASE("curve svg carries one polyline per series and bands as polygons") {
    PlotSpec spec = sample_curve();
    std::string svg = render_plot_svg(spec);
    CHECK(count(svg, "<polyline") == 2);
    CHECK(count(svg, "<polygon") == 1);  // only the first series has a band
    CHECK(svg.find("returns") != std::string::npos);
    CHECK(svg.find("env steps") != std::string::npos);
    CHECK(svg.find("ours") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    spec.title = "a<b&c>";
    std::string escaped = render_plot_svg(spec);
    CHECK(escaped.find("a&lt;b&amp;c&gt;") != std::string::npos);
    CHECK(escaped.find("a<b&c>") == std::string::npos);
  }

  TEST_CASE("bar svg draws bars, whiskers, and labels") {
    std::string svg = render_plot_svg(sample_bars());
    // background rect plus one per bar
    CHECK(count(svg, "<rect") == 4);
    CHECK(svg.find("ablation") != std::string::npos);
    // two whisker sets of three lines each; the zero-error bar has none
    CHECK(count(svg, "stroke=\"black\"") >= 6);
  }

  TEST_CASE("png rasterizer touches the plot area") {
    Image8 img = render_plot_png(sample_curve());
    REQUIRE(img.w == 640);
    REQUIRE(img.h == 400);
    int colored = 0;
    for (size_t i = 0; i + 2 < img.px.size(); i += 3)
      if (img.px[i] != img.px[i + 1] || img.px[i + 1] != img.px[i + 2])
        ++colored;
    CHECK(colored > 200);  // curves and bands are chromatic, axes are not

    Image8 bars = render_plot_png(sample_bars());
    int nonwhite = 0;
    for (uint8_t v : bars.px)
      if (v != 255) ++nonwhite;
    CHECK(nonwhite > 1000);
  }

  TEST_CASE("emit_plots writes one chart set per category and curve") {
    Taxonomy tax = parse_taxonomy("C4 DMC dense yes none\n");
    fs::path dir = fs::temp_directory_path() / "replab_emit_test";
    fs::remove_all(dir);

    CHECK(emit_plots({}, tax, dir.string()).empty());
    CHECK_FALSE(fs::exists(dir / "bar_c4.png"));

    std::vector<RunRecord> rs;
    for (uint64_t seed = 1; seed <= 2; ++seed)
      for (int64_t step : {1000, 2000}) {
        RunRecord r;
        r.run_id = "t-" + std::to_string(seed);
        r.method = "ours";
        r.env = "pointmass";
        r.seed = seed;
        r.step = step;
        r.episode_return = 10;
        r.normalized_score = 0.4 + 0.1 * static_cast<double>(seed);
        r.config_hash = "h";
        r.env_family = "DMC";
        r.distractors = true;
        rs.push_back(r);
      }
    std::vector<std::string> written = emit_plots(rs, tax, dir.string());
    std::vector<std::string> expect = {
        (dir / "bar_c4.png").string(),
        (dir / "bar_c4.svg").string(),
        (dir / "curve_ours_pointmass.png").string(),
        (dir / "curve_ours_pointmass.svg").string(),
    };
    CHECK(written == expect);
    for (const auto& p : written) CHECK(fs::exists(p));
    fs::remove_all(dir);
  }
}
