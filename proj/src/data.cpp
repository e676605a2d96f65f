#include "ctsf/data.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

namespace ctsf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Numeric timestamps are taken as-is; otherwise ISO-8601 date-times (UTC) are
// converted to seconds since the epoch.
std::optional<double> parse_timestamp(const std::string& s) {
  if (auto v = parse_number(s)) return v;
  for (const char* fmt : {"%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d"}) {
    std::tm tm{};
    std::istringstream is(s);
    is >> std::get_time(&tm, fmt);
    if (!is.fail() && is.peek() == std::char_traits<char>::eof()) return static_cast<double>(timegm(&tm));
  }
  return std::nullopt;
}

double mean(const Vector<double>& v) { return v.mean(); }

}  // namespace

CorrelatedSet::CorrelatedSet(std::vector<TimeSeries> series) : series_(std::move(series)) {
  if (series_.empty()) throw DataError("correlated set needs at least one series");
  const auto& first = series_.front();
  if (first.length() == 0) throw DataError("series '" + first.id + "' is empty");
  for (const auto& s : series_) {
    if (s.length() != first.length())
      throw DataError("series '" + s.id + "' has length " + std::to_string(s.length()) + ", expected " +
                      std::to_string(first.length()));
    if (s.start_time != first.start_time || s.interval != first.interval)
      throw DataError("series '" + s.id + "' is not aligned with '" + first.id + "'");
    if (!(s.interval > 0.0)) throw DataError("series '" + s.id + "' has a non-positive interval");
    if (!all_finite(s.values)) throw DataError("series '" + s.id + "' contains non-finite values");
  }
}

CorrelatedSet CorrelatedSet::first(Index count) const {
  if (count < 1 || count > size())
    throw UsageError("requested " + std::to_string(count) + " series from a set of " + std::to_string(size()));
  return CorrelatedSet(std::vector<TimeSeries>(series_.begin(), series_.begin() + count));
}

RowMatrix<double> CorrelatedSet::matrix() const {
  RowMatrix<double> m(size(), length());
  for (Index i = 0; i < size(); ++i) m.row(i) = series(i).values.transpose();
  return m;
}

LayoutDescriptor LayoutDescriptor::parse(const std::string& columns, const std::string& timestamp) {
  LayoutDescriptor d;
  for (auto& c : split_fields(columns)) {
    if (c.empty()) throw UsageError("empty column name in layout '" + columns + "'");
    d.columns.push_back(c);
  }
  if (d.columns.empty()) throw UsageError("layout names no columns");
  if (!timestamp.empty()) d.timestamp = timestamp;
  return d;
}

std::vector<std::string> csv_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  if (trim(line).empty()) throw DataError(path.string() + " is empty");
  std::vector<std::string> fields = split_fields(line);
  const bool has_header = std::any_of(fields.begin(), fields.end(), [](const std::string& f) {
    return !f.empty() && !parse_timestamp(f).has_value();
  });
  if (!has_header)
    for (std::size_t i = 0; i < fields.size(); ++i) fields[i] = std::to_string(i);
  return fields;
}

CorrelatedSet ingest_csv(const std::filesystem::path& path, const LayoutDescriptor& layout) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::vector<Index> line_numbers;
  std::string line;
  for (Index n = 1; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
    line_numbers.push_back(n);
  }
  if (rows.empty()) throw DataError(path.string() + " is empty");

  const auto& first = rows.front();
  const bool has_header = std::any_of(first.begin(), first.end(), [](const std::string& f) {
    return !f.empty() && !parse_timestamp(f).has_value();
  });
  const std::size_t width = first.size();

  auto resolve = [&](const std::string& name) -> std::size_t {
    if (has_header) {
      const auto it = std::find(first.begin(), first.end(), name);
      if (it != first.end()) return static_cast<std::size_t>(it - first.begin());
    }
    if (auto idx = parse_number(name); idx && *idx >= 0 && *idx == std::floor(*idx) && *idx < double(width))
      return static_cast<std::size_t>(*idx);
    throw UsageError("column '" + name + "' not found in " + path.string());
  };
  std::vector<std::size_t> cols;
  for (const auto& c : layout.columns) cols.push_back(resolve(c));
  std::optional<std::size_t> time_col;
  if (layout.timestamp) time_col = resolve(*layout.timestamp);

  const std::size_t begin = has_header ? 1 : 0;
  const Index count = static_cast<Index>(rows.size() - begin);
  if (count < 1) throw DataError(path.string() + " has no data rows");
  RowMatrix<double> values(static_cast<Index>(cols.size()), count);
  std::vector<double> times;
  for (std::size_t r = begin; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ":" + std::to_string(line_numbers[r]);
    if (row.size() != width)
      throw DataError(where + ": row has " + std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& cell = row[cols[c]];
      if (cell.empty()) throw DataError(where + ": missing value in column " + layout.columns[c]);
      auto v = parse_number(cell);
      if (!v) throw DataError(where + ": non-numeric value '" + cell + "' in column " + layout.columns[c]);
      values(static_cast<Index>(c), static_cast<Index>(r - begin)) = *v;
    }
    if (time_col) {
      auto t = parse_timestamp(row[*time_col]);
      if (!t) throw DataError(where + ": unparseable timestamp '" + row[*time_col] + "'");
      times.push_back(*t);
    }
  }

  double start = 0.0, interval = 1.0;
  if (time_col) {
    start = times.front();
    if (times.size() > 1) {
      interval = times[1] - times[0];
      if (!(interval > 0.0)) throw DataError(path.string() + ": timestamps must increase");
      for (std::size_t i = 2; i < times.size(); ++i) {
        const double step = times[i] - times[i - 1];
        if (std::abs(step - interval) > 1e-9 * std::max(1.0, std::abs(interval)))
          throw DataError(path.string() + ":" + std::to_string(line_numbers[i + begin]) +
                          ": non-uniform interval (" + std::to_string(step) + " vs " + std::to_string(interval) + ")");
      }
    }
  }

  std::vector<TimeSeries> series;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::string id = has_header ? first[cols[c]] : "col" + std::to_string(cols[c]);
    series.push_back({id, start, interval, values.row(static_cast<Index>(c)).transpose()});
  }
  return CorrelatedSet(std::move(series));
}

void write_csv(const CorrelatedSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "time";
  for (const auto& s : set.all()) out << ',' << s.id;
  out << '\n' << std::setprecision(17);
  const auto& t0 = set.target();
  for (Index t = 0; t < set.length(); ++t) {
    out << t0.start_time + static_cast<double>(t) * t0.interval;
    for (const auto& s : set.all()) out << ',' << s.values(t);
    out << '\n';
  }
}

Segment whole(const CorrelatedSet& set) { return {0, set.matrix()}; }

std::pair<Segment, Segment> split(const CorrelatedSet& set, double train_frac, Index min_side) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw UsageError("train fraction must lie strictly between 0 and 1, got " + std::to_string(train_frac));
  const Index m = set.length();
  const Index cut = static_cast<Index>(std::floor(train_frac * static_cast<double>(m)));
  if (cut < min_side || m - cut < min_side)
    throw DataError("series of length " + std::to_string(m) + " is too short to split into sides of at least " +
                    std::to_string(min_side));
  const RowMatrix<double> all = set.matrix();
  return {Segment{0, all.leftCols(cut)}, Segment{cut, all.rightCols(m - cut)}};
}

std::pair<Segment, Segment> carve_validation(const Segment& train, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw UsageError("validation fraction must lie in [0, 1)");
  const Index held = static_cast<Index>(std::floor(fraction * static_cast<double>(train.length())));
  const Index kept = train.length() - held;
  return {Segment{train.start, train.values.leftCols(kept)},
          Segment{train.start + kept, train.values.rightCols(held)}};
}

std::vector<WindowSample> segment(const Segment& seg, Index l, Index p, Index stride) {
  if (l < 1 || p < 1 || stride < 1) throw UsageError("segment: l, p and stride must be positive");
  std::vector<WindowSample> out;
  if (seg.length() < l + p) {
    std::clog << "warning: segment of length " << seg.length() << " is shorter than l + p = " << l + p
              << "; no windows produced\n";
    return out;
  }
  const Index count = (seg.length() - l - p) / stride + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index a = i * stride;
    RowMatrix<double> block = seg.values.middleCols(a, l);
    out.push_back({seg.start + a, Tensor::from_matrix(block), seg.values.row(0).segment(a + l, p).transpose()});
  }
  return out;
}

Normalizer::Normalizer(Vector<double> minimum, Vector<double> maximum)
    : minimum_(std::move(minimum)), maximum_(std::move(maximum)) {
  if (minimum_.size() != maximum_.size()) throw DimensionError("normalizer bounds differ in length");
  for (Index i = 0; i < minimum_.size(); ++i)
    if (!(maximum_(i) >= minimum_(i))) throw DataError("normalizer maximum below minimum");
}

Normalizer Normalizer::fit(const Segment& train) {
  if (train.length() == 0) throw DataError("cannot fit a normalizer on an empty segment");
  return Normalizer(train.values.rowwise().minCoeff(), train.values.rowwise().maxCoeff());
}

double Normalizer::span(Index series) const {
  const double s = maximum_(series) - minimum_(series);
  return s > 0.0 ? s : 1.0;
}

Segment Normalizer::transform(const Segment& seg) const {
  if (seg.num_series() != num_series())
    throw DimensionError("normalizer fitted on " + std::to_string(num_series()) + " series, segment has " +
                         std::to_string(seg.num_series()));
  Segment out{seg.start, RowMatrix<double>(seg.values.rows(), seg.values.cols())};
  for (Index i = 0; i < seg.num_series(); ++i)
    out.values.row(i) = (seg.values.row(i).array() - minimum_(i)) / span(i);
  return out;
}

Vector<double> Normalizer::inverse(Index series, const Vector<double>& values) const {
  return (values.array() * span(series) + minimum_(series)).matrix();
}

PreparedSplit prepare_split(const CorrelatedSet& set, Index l, Index p, double train_frac,
                            double validation_fraction) {
  PreparedSplit out;
  std::tie(out.train, out.test) = split(set, train_frac, l + p);
  std::tie(out.fit, out.validation) = carve_validation(out.train, validation_fraction);
  out.normalizer = Normalizer::fit(out.train);
  out.fit_samples = segment(out.normalizer.transform(out.fit), l, p);
  out.validation_samples = segment(out.normalizer.transform(out.validation), l, p);
  return out;
}

double pearson_correlation(const Vector<double>& a, const Vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("correlation needs equal lengths >= 2");
  const Vector<double> da = a.array() - mean(a), db = b.array() - mean(b);
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  return denom > 0.0 ? da.dot(db) / denom : 0.0;
}

TimeSeries make_uncorrelated(const TimeSeries& reference, std::uint64_t seed) {
  if (reference.length() == 0) throw UsageError("make_uncorrelated: empty reference");
  TimeSeries out = reference;
  out.id = reference.id + "_uncorrelated";
  std::vector<Index> order(static_cast<std::size_t>(reference.length()));
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed + attempt);
    std::shuffle(order.begin(), order.end(), rng);
    for (Index i = 0; i < reference.length(); ++i) out.values(i) = reference.values(order[static_cast<std::size_t>(i)]);
    if (reference.length() < 2 || std::abs(pearson_correlation(out.values, reference.values)) < 0.1) return out;
  }
}

SyntheticKind parse_synthetic_kind(const std::string& text) {
  if (text == "lagged") return SyntheticKind::lagged;
  if (text == "independent") return SyntheticKind::independent;
  throw UsageError("unknown synthetic kind '" + text + "' (expected lagged or independent)");
}

std::string to_string(SyntheticKind kind) { return kind == SyntheticKind::lagged ? "lagged" : "independent"; }

namespace {

constexpr double kLevel = 3.0;
constexpr double kAmplitude = 0.5;
constexpr double kPersistence = 0.95;
constexpr Index kBurnIn = 200;

// Stationary AR(1) with standard deviation kAmplitude.
Vector<double> ar_process(Index length, std::mt19937_64& rng) {
  std::normal_distribution<double> shock(0.0, kAmplitude * std::sqrt(1.0 - kPersistence * kPersistence));
  double state = 0.0;
  for (Index i = 0; i < kBurnIn; ++i) state = kPersistence * state + shock(rng);
  Vector<double> out(length);
  for (Index i = 0; i < length; ++i) out(i) = state = kPersistence * state + shock(rng);
  return out;
}

}  // namespace

CorrelatedSet generate_synthetic(const SyntheticConfig& config) {
  if (config.length < 2) throw UsageError("synthetic length must be >= 2");
  if (config.num_series < 1) throw UsageError("synthetic num_series must be >= 1");
  if (config.lag < 0) throw UsageError("synthetic lag must be >= 0");
  if (!(config.noise >= 0.0)) throw UsageError("synthetic noise must be >= 0");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Index m = config.length;

  std::vector<Vector<double>> signals;
  if (config.kind == SyntheticKind::lagged && config.num_series > 1) {
    const Vector<double> driver = ar_process(m + config.lag, rng);
    signals.push_back(driver.head(m));                 // target: driver delayed by lag
    signals.push_back(driver.tail(m));                 // leading driver
    for (Index k = 2; k < config.num_series; ++k)
      signals.push_back(0.5 * driver.tail(m) + 0.5 * ar_process(m, rng));
  } else {
    for (Index k = 0; k < config.num_series; ++k) signals.push_back(ar_process(m, rng));
  }

  std::vector<TimeSeries> series;
  for (Index k = 0; k < config.num_series; ++k) {
    Vector<double> v = signals[static_cast<std::size_t>(k)].array() + kLevel;
    for (Index t = 0; t < m; ++t) v(t) += config.noise * noise(rng);
    series.push_back({k == 0 ? "target" : "driver" + std::to_string(k), 0.0, 1.0, std::move(v)});
  }
  return CorrelatedSet(std::move(series));
}

}  // namespace ctsf
