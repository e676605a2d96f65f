#include "ctsf/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctsf/baselines.hpp"
#include "ctsf/model.hpp"

namespace ctsf {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_value(const std::string& token, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != token.size()) throw DataError("checkpoint: bad value '" + token + "' in " + context);
  return v;
}

void write_values(std::ostream& out, const double* data, Index n) {
  for (Index i = 0; i < n; ++i) out << ' ' << format_value(data[i]);
  out << '\n';
}

std::vector<double> read_values(std::istringstream& is, Index n, const std::string& context) {
  std::vector<double> values;
  std::string token;
  while (is >> token) values.push_back(parse_value(token, context));
  if (static_cast<Index>(values.size()) != n)
    throw DataError("checkpoint: " + context + " has " + std::to_string(values.size()) + " values, expected " +
                    std::to_string(n));
  return values;
}

std::string shape_token(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

}  // namespace

void save_checkpoint(const TrainableModel& model, const std::optional<Normalizer>& normalizer,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << "ctsf-checkpoint " << kCheckpointVersion;
  for (const auto& [key, value] : model.header_fields()) out << ' ' << key << '=' << value;
  out << '\n';
  const auto& params = model.parameters();
  for (const auto& slot : model.layout().slots()) {
    out << slot.name << ' ' << shape_token(slot.shape);
    write_values(out, params.data() + slot.offset, slot.size);
  }
  if (normalizer) {
    out << "normalizer.minimum " << normalizer->num_series();
    write_values(out, normalizer->minimum().data(), normalizer->num_series());
    out << "normalizer.maximum " << normalizer->num_series();
    write_values(out, normalizer->maximum().data(), normalizer->num_series());
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint " + path.string() + " is empty");

  std::istringstream header(line);
  std::string magic;
  int version = 0;
  header >> magic >> version;
  if (magic != "ctsf-checkpoint") throw DataError(path.string() + " is not a checkpoint");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  HeaderFields fields;
  std::string kv;
  while (header >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint header entry without '=': " + kv);
    fields.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (fields.empty() || fields.front().first != "model") throw DataError("checkpoint header lacks a model field");

  LoadedCheckpoint result;
  const std::string& kind = fields.front().second;
  try {
    if (kind == "crnn" || kind == "aecrnn")
      result.model = std::make_unique<CrnnModel>(CrnnModel::config_from_header(fields));
    else
      result.model = std::make_unique<RecurrentBaseline>(RecurrentBaseline::config_from_header(fields));
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }

  auto& params = result.model->parameters();
  for (const auto& slot : result.model->layout().slots()) {
    if (!std::getline(in, line)) throw DataError("checkpoint is missing tensor " + slot.name);
    std::istringstream is(line);
    std::string name, shape;
    is >> name >> shape;
    if (name != slot.name || shape != shape_token(slot.shape))
      throw DataError("checkpoint tensor '" + name + "' " + shape + " does not match expected '" + slot.name + "' " +
                      shape_token(slot.shape));
    const auto values = read_values(is, slot.size, name);
    std::copy(values.begin(), values.end(), params.data() + slot.offset);
  }

  std::optional<Vector<double>> minimum, maximum;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name;
    Index n = 0;
    is >> name >> n;
    if (name != "normalizer.minimum" && name != "normalizer.maximum")
      throw DataError("unexpected checkpoint entry '" + name + "'");
    const auto values = read_values(is, n, name);
    Vector<double> v = Eigen::Map<const Vector<double>>(values.data(), n);
    (name == "normalizer.minimum" ? minimum : maximum) = std::move(v);
  }
  if (minimum.has_value() != maximum.has_value()) throw DataError("checkpoint normalizer is incomplete");
  if (minimum) result.normalizer = Normalizer(*minimum, *maximum);
  return result;
}

}  // namespace ctsf
