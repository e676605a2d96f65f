#include <random>

#include "ctsf/data.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace ctsf;

namespace {

CorrelatedSet ramp_set(Index m, Index series = 2) {
  std::vector<TimeSeries> all;
  for (Index k = 0; k < series; ++k) {
    Vector<double> v(m);
    for (Index t = 0; t < m; ++t) v(t) = static_cast<double>(t) + 1000.0 * static_cast<double>(k);
    all.push_back({"s" + std::to_string(k), 0.0, 1.0, v});
  }
  return CorrelatedSet(all);
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("ingest a three-column file") {
  TempDir dir;
  const auto path = dir.write("x.csv", "a,b,c\n1,2,3\n4,5,6\n7,8,9\n");
  const CorrelatedSet set = ingest_csv(path, LayoutDescriptor::parse("a,b,c"));
  CHECK(set.size() == 3);
  CHECK(set.length() == 3);
  CHECK(set.target().id == "a");
  CHECK(set.series(2).values(1) == 6.0);

  const CorrelatedSet reordered = ingest_csv(path, LayoutDescriptor::parse("c,0"));
  CHECK(reordered.target().id == "c");
  CHECK(reordered.series(1).values(2) == 7.0);

  const auto bare = dir.write("bare.csv", "1.5,2\n3,4e-1\n");
  const CorrelatedSet no_header = ingest_csv(bare, LayoutDescriptor::parse("1,0"));
  CHECK(no_header.target().values(1) == 0.4);
  CHECK(no_header.series(1).values(0) == 1.5);

  CHECK_THROWS_AS(ingest_csv(path, LayoutDescriptor::parse("zzz")), UsageError);
  CHECK_THROWS_AS(ingest_csv(dir / "missing.csv", LayoutDescriptor::parse("a")), DataError);
}

TEST_CASE("ingest rejects malformed rows with their line number") {
  TempDir dir;
  const auto blank = dir.write("blank.csv", "a,b\n1,2\n3,\n5,6\n");
  const std::string msg = error_of([&] { ingest_csv(blank, LayoutDescriptor::parse("a,b")); });
  CHECK(msg.find(":3:") != std::string::npos);
  CHECK_THROWS_AS(ingest_csv(blank, LayoutDescriptor::parse("a,b")), DataError);

  const auto ragged = dir.write("ragged.csv", "a,b\n1,2\n3,4,5\n");
  CHECK(error_of([&] { ingest_csv(ragged, LayoutDescriptor::parse("a,b")); }).find(":3:") != std::string::npos);

  const auto text = dir.write("text.csv", "a,b\n1,2\n3,x\n");
  CHECK(error_of([&] { ingest_csv(text, LayoutDescriptor::parse("a,b")); }).find("non-numeric") != std::string::npos);
}

TEST_CASE("ingest enforces a constant sampling interval") {
  TempDir dir;
  const auto good = dir.write("good.csv", "time,a,b\n2020-01-01 00:00:00,1,2\n2020-01-01 00:02:00,3,4\n"
                                          "2020-01-01 00:04:00,5,6\n");
  const CorrelatedSet set = ingest_csv(good, LayoutDescriptor::parse("b,a", "time"));
  CHECK(set.target().interval == 120.0);

  const auto bad = dir.write("bad.csv", "t,a,b\n0,1,2\n10,3,4\n25,5,6\n");
  const std::string msg = error_of([&] { ingest_csv(bad, LayoutDescriptor::parse("a,b", "t")); });
  CHECK(msg.find("interval") != std::string::npos);
}

TEST_CASE("split follows the 84/16 protocol") {
  auto [train, test] = split(ramp_set(100));
  CHECK(train.length() == 84);
  CHECK(test.length() == 16);
  CHECK(test.start == 84);
  auto [train50, test50] = split(ramp_set(50));
  CHECK(train50.length() == 42);
  CHECK(test50.length() == 8);
  CHECK_THROWS_AS(split(ramp_set(100), 1.0), UsageError);
  CHECK_THROWS_AS(split(ramp_set(100), 0.0), UsageError);
  CHECK_THROWS_AS(split(ramp_set(20), 0.84, 10), DataError);
}

TEST_CASE("validation carve-out takes the tail of the training segment") {
  auto [train, test] = split(ramp_set(200));
  auto [fit, val] = carve_validation(train);
  CHECK(fit.length() + val.length() == train.length());
  CHECK(val.length() == 25);  // floor(0.15 * 168)
  CHECK(val.start == fit.length());
  CHECK(val.values(0, 0) == static_cast<double>(fit.length()));
}

TEST_CASE("segment counts and boundaries") {
  const Segment seg{0, ramp_set(10).matrix()};
  const auto windows = segment(seg, 3, 2);
  CHECK(windows.size() == 6);
  CHECK(windows[1].offset == 1);
  CHECK(windows[1].input(0, 0) == 1.0);
  CHECK(windows[1].input(1, 2) == 1003.0);
  CHECK(windows[1].target(0) == 4.0);
  CHECK(windows[1].target(1) == 5.0);

  CHECK(segment(Segment{0, ramp_set(5).matrix()}, 3, 2).size() == 1);
  CHECK(segment(Segment{0, ramp_set(4).matrix()}, 3, 2).empty());
  CHECK(segment(seg, 3, 2, 2).size() == 3);
  CHECK(segment(seg, 3, 2, 5).size() == 2);
}

TEST_CASE("stride-1 windows cover the whole segment") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Index> pick(1, 12);
  for (int trial = 0; trial < 30; ++trial) {
    const Index l = pick(rng), p = pick(rng), len = l + p + pick(rng) * 3;
    const Segment seg{5, ramp_set(len, 1).matrix()};
    const auto w = segment(seg, l, p);
    std::vector<bool> seen(static_cast<std::size_t>(len), false);
    for (const auto& s : w)
      for (Index i = 0; i < l; ++i) seen[static_cast<std::size_t>(s.offset - 5 + i)] = true;
    for (Index i = 0; i < p; ++i) seen[static_cast<std::size_t>(w.back().offset - 5 + l + i)] = true;
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("no test window overlaps or precedes training data") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<Index> small(1, 20), length(60, 400);
  std::uniform_real_distribution<double> frac(0.5, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    const Index l = small(rng), p = small(rng);
    const CorrelatedSet set = ramp_set(length(rng));
    auto [train, test] = split(set, frac(rng), 1);
    const auto tr = segment(train, l, p);
    const auto te = segment(test, l, p);
    Index last_train = -1;
    for (const auto& s : tr) last_train = std::max(last_train, s.offset + l + p - 1);
    for (const auto& s : te) CHECK(s.offset > last_train);
  }
}

TEST_CASE("normalizer is fitted on training data and inverts exactly") {
  auto [train, test] = split(ramp_set(100));
  const Normalizer norm = Normalizer::fit(train);
  CHECK(norm.minimum()(0) == 0.0);
  CHECK(norm.maximum()(0) == 83.0);
  const Segment scaled = norm.transform(train);
  CHECK(scaled.values.minCoeff() >= 0.0);
  CHECK(scaled.values.maxCoeff() <= 1.0);
  CHECK(norm.transform(test).values.maxCoeff() > 1.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 83.0);
  for (int i = 0; i < 100; ++i) {
    const double v = u(rng);
    CHECK(std::abs(norm.inverse(0, norm.transform(0, v)) - v) <= 1e-12);
  }

  Vector<double> flat = Vector<double>::Constant(10, 2.5);
  const Normalizer constant = Normalizer::fit(Segment{0, RowMatrix<double>(flat.transpose())});
  CHECK(constant.span(0) == 1.0);
  CHECK(constant.transform(0, 2.5) == 0.0);
}

TEST_CASE("uncorrelated surrogate") {
  const CorrelatedSet set = generate_synthetic({SyntheticKind::lagged, 3, 500, 2, 5, 0.05});
  const TimeSeries& ref = set.target();
  const TimeSeries a = make_uncorrelated(ref, 11);
  CHECK(a.length() == ref.length());
  CHECK(std::abs(pearson_correlation(a.values, ref.values)) < 0.1);
  CHECK(std::abs(a.values.mean() - ref.values.mean()) < 1e-12);
  CHECK(std::abs(a.values.squaredNorm() - ref.values.squaredNorm()) < 1e-9 * ref.values.squaredNorm());
  CHECK(make_uncorrelated(ref, 11).values == a.values);
  CHECK(make_uncorrelated(ref, 12).values != a.values);
  CHECK_THROWS_AS(make_uncorrelated(TimeSeries{}, 1), UsageError);
}

TEST_CASE("synthetic generator") {
  const SyntheticConfig cfg{SyntheticKind::lagged, 1, 2000, 2, 5, 0.05};
  const CorrelatedSet a = generate_synthetic(cfg);
  CHECK(a.size() == 2);
  CHECK(a.length() == 2000);
  CHECK(generate_synthetic(cfg).matrix() == a.matrix());

  const Vector<double> target = a.target().values.tail(1995);
  const Vector<double> lagged_driver = a.series(1).values.head(1995);
  CHECK(pearson_correlation(target, lagged_driver) > 0.95);
  CHECK(std::abs(pearson_correlation(target, a.series(1).values.tail(1995))) < 0.95);
  CHECK(a.matrix().minCoeff() > 0.0);

  const CorrelatedSet ind = generate_synthetic({SyntheticKind::independent, 1, 2000, 2, 5, 0.05});
  CHECK(std::abs(pearson_correlation(ind.target().values, ind.series(1).values)) < 0.3);
  CHECK_THROWS_AS(parse_synthetic_kind("weird"), UsageError);
}

TEST_CASE("csv round trip") {
  TempDir dir;
  const CorrelatedSet set = generate_synthetic({SyntheticKind::lagged, 4, 50, 3, 2, 0.1});
  write_csv(set, dir / "out.csv");
  const CorrelatedSet back = ingest_csv(dir / "out.csv", LayoutDescriptor::parse("target,driver1,driver2", "time"));
  CHECK(back.matrix() == set.matrix());
}
