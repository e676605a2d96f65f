#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "ctsf/baselines.hpp"
#include "ctsf/checkpoint.hpp"
#include "ctsf/data.hpp"
#include "ctsf/errors.hpp"
#include "ctsf/evaluation.hpp"
#include "ctsf/model.hpp"
#include "ctsf/training.hpp"

namespace ctsf::cli {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

long long parse_integer(const std::string& text, const std::string& what) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw UsageError(what + ": '" + text + "' is not an integer");
  return v;
}

// "0,1,2" or "0-4" or a mix.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      const long long v = parse_integer(item, "--seeds");
      if (v < 0) throw UsageError("--seeds: seeds must be non-negative");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const long long lo = parse_integer(item.substr(0, dash), "--seeds");
    const long long hi = parse_integer(item.substr(dash + 1), "--seeds");
    if (lo < 0 || hi < lo) throw UsageError("--seeds: bad range '" + item + "'");
    for (long long s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) throw UsageError("--seeds: no seeds given");
  return out;
}

std::vector<Index> parse_index_list(const std::string& text, const std::string& what) {
  std::vector<Index> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<Index>(parse_integer(item, what)));
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

std::string join(const std::vector<Index>& values) {
  std::string out;
  for (Index v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

// Flags do not capture their defaults, which the manifest needs.
CLI::Option* add_flag(CLI::App& app, const std::string& name, bool& value, const std::string& description) {
  return app.add_flag(name, value, description)->default_str(value ? "true" : "false");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Option groups

struct DataOptions {
  std::string path;
  std::string target;
  std::string columns;
  std::string timestamp;
  Index series = 0;

  void add(CLI::App& app, bool required = true) {
    auto* opt = app.add_option("--data", path, "CSV file with one column per series");
    if (required) opt->required();
    app.add_option("--target", target, "Target column (name or zero-based index); default: first value column");
    app.add_option("--columns", columns, "Comma-separated correlated columns; default: all other value columns");
    app.add_option("--timestamp", timestamp, "Timestamp column; default: a column named time or timestamp");
    app.add_option("--series", series, "|X|, number of series to use including the target; 0 = all")
        ->check(CLI::NonNegativeNumber);
  }

  CorrelatedSet load(RunContext& ctx) const {
    ctx.record_input("data", path);
    const std::vector<std::string> names = csv_columns(path);
    auto resolve = [&](const std::string& token) -> std::size_t {
      if (auto it = std::find(names.begin(), names.end(), token); it != names.end())
        return static_cast<std::size_t>(it - names.begin());
      const long long idx = parse_integer(token, "column");
      if (idx < 0 || idx >= static_cast<long long>(names.size()))
        throw UsageError("column '" + token + "' not found in " + path);
      return static_cast<std::size_t>(idx);
    };
    std::optional<std::size_t> time_col;
    if (!timestamp.empty()) {
      time_col = resolve(timestamp);
    } else {
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == "time" || names[i] == "timestamp") time_col = i;
    }
    std::vector<std::size_t> value_cols;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (i != time_col) value_cols.push_back(i);
    if (value_cols.empty()) throw DataError(path + " has no value columns");

    std::vector<std::size_t> chosen{target.empty() ? value_cols.front() : resolve(target)};
    if (chosen.front() == time_col) throw UsageError("the target column is the timestamp column");
    if (!columns.empty()) {
      for (const auto& c : split_list(columns)) chosen.push_back(resolve(c));
    } else {
      for (std::size_t c : value_cols)
        if (c != chosen.front()) chosen.push_back(c);
    }
    if (series > 0) {
      if (series > static_cast<Index>(chosen.size()))
        throw UsageError("--series " + std::to_string(series) + " but only " + std::to_string(chosen.size()) +
                         " value columns are available");
      chosen.resize(static_cast<std::size_t>(series));
    }
    LayoutDescriptor layout;
    for (std::size_t c : chosen) layout.columns.push_back(names[c]);
    if (time_col) layout.timestamp = names[*time_col];
    return ingest_csv(path, layout);
  }
};

struct ModelOptions {
  std::string model = "crnn";
  Index l = 50, p = 25;
  Index stages = 1, filters = 2, filter_size = 3, hidden = 4;
  std::string cell = "rnn";
  std::string layout = "sequence";
  std::string conv_activation = "linear";
  std::string inputs = "target";
  bool off_grid = false;

  void add(CLI::App& app, bool with_kind, bool with_solution = true) {
    if (with_kind) app.add_option("--model", model, "crnn, aecrnn, or the rnn/lstm baselines");
    app.add_option("--l", l, "Input window length l");
    app.add_option("--p", p, "Forecast horizon p");
    if (with_solution) {
      app.add_option("--stages", stages, "Convolution + pooling stages");
      app.add_option("--filters", filters, "Filters per convolution (alpha)");
      app.add_option("--filter-size", filter_size, "Convolution filter size");
    }
    app.add_option("--hidden", hidden, "Recurrent hidden size h");
    app.add_option("--cell", cell, "Recurrent cell of crnn/aecrnn: rnn or lstm");
    app.add_option("--layout", layout, "Recurrent input layout: sequence or single-step");
    app.add_option("--conv-activation", conv_activation, "linear or tanh");
    app.add_option("--inputs", inputs, "Rows read by rnn/lstm baselines: target or all");
    add_flag(app, "--off-grid", off_grid, "Allow solution parameters outside the standard search grid");
  }

  bool is_baseline() const { return model == "rnn" || model == "lstm"; }

  ModelConfig config(Index num_series, std::uint64_t seed) const {
    ModelConfig c;
    c.kind = parse_model_kind(model);
    c.num_series = num_series;
    c.input_length = l;
    c.horizon = p;
    c.stages = stages;
    c.filters = filters;
    c.filter_size = filter_size;
    c.hidden = hidden;
    c.cell = parse_cell_kind(cell);
    c.layout = parse_rnn_layout(layout);
    c.conv_activation = parse_conv_activation(conv_activation);
    c.seed = seed;
    c.off_grid = off_grid;
    return c;
  }

  RecurrentBaselineConfig baseline_config(Index num_series, std::uint64_t seed) const {
    RecurrentBaselineConfig c;
    c.cell = parse_cell_kind(model);
    c.inputs = parse_baseline_inputs(inputs);
    c.num_series = num_series;
    c.input_length = l;
    c.horizon = p;
    c.hidden = hidden;
    c.seed = seed;
    return c;
  }

  // Config errors surface before any data is read.
  void check(Index num_series) const {
    if (is_baseline()) {
      baseline_config(std::max<Index>(num_series, 1), 0).validate();
    } else {
      config(std::max<Index>(num_series, 1), 0).validate();
    }
  }
};

struct TrainOptions {
  std::string optimizer = "adam";
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  Index batch_size = 32, epochs = 100, patience = 10;
  bool deterministic = true, shuffle = true;
  double train_fraction = 0.84, validation_fraction = 0.15;

  void add(CLI::App& app) {
    app.add_option("--optimizer", optimizer, "adam or sgd");
    app.add_option("--lr", lr, "Learning rate");
    app.add_option("--beta1", beta1, "Adam beta1");
    app.add_option("--beta2", beta2, "Adam beta2");
    app.add_option("--epsilon", epsilon, "Adam epsilon");
    app.add_option("--batch-size", batch_size, "Mini-batch size");
    app.add_option("--epochs", epochs, "Maximum epochs");
    app.add_option("--patience", patience, "Epochs without validation improvement before stopping");
    add_flag(app, "--deterministic,!--nondeterministic", deterministic, "Seeded shuffling (default on)");
    add_flag(app, "--shuffle,!--no-shuffle", shuffle, "Shuffle samples every epoch (default on)");
    app.add_option("--train-fraction", train_fraction, "Chronological train share");
    app.add_option("--validation-fraction", validation_fraction, "Share of the training part held out for validation");
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig t;
    t.optimizer = parse_optimizer(optimizer);
    t.learning_rate = lr;
    t.beta1 = beta1;
    t.beta2 = beta2;
    t.epsilon = epsilon;
    t.batch_size = batch_size;
    t.max_epochs = epochs;
    t.patience = patience;
    t.seed = seed;
    t.deterministic = deterministic;
    t.shuffle = shuffle;
    t.validate();
    return t;
  }
};

struct Fitted {
  std::unique_ptr<TrainableModel> model;
  TrainReport report;
  Normalizer normalizer;
};

Fitted fit(const CorrelatedSet& set, const ModelOptions& m, const TrainOptions& t, std::uint64_t seed) {
  const PreparedSplit prepared = prepare_split(set, m.l, m.p, t.train_fraction, t.validation_fraction);
  if (prepared.fit_samples.empty()) throw DataError("no training windows for l + p = " + std::to_string(m.l + m.p));
  Fitted out;
  out.normalizer = prepared.normalizer;
  if (m.is_baseline()) {
    auto trained = train_recurrent_baseline(prepared.fit_samples, prepared.validation_samples,
                                            m.baseline_config(set.size(), seed), t.config(seed));
    out.model = std::move(trained.model);
    out.report = std::move(trained.report);
  } else {
    auto model = std::make_unique<CrnnModel>(m.config(set.size(), seed));
    out.report = train(*model, prepared.fit_samples, prepared.validation_samples, t.config(seed));
    out.model = std::move(model);
  }
  return out;
}

std::string report_text(const TrainReport& report) {
  std::ostringstream out;
  write_train_report(report, out);
  return out.str();
}

void throw_if_diverged(const TrainReport& report) {
  if (report.stop == StopReason::diverged)
    throw ExitError(kExitNumeric, "training diverged after " + std::to_string(report.epochs.size()) +
                                      " epochs: " + report.message);
}

std::string field(const HeaderFields& fields, const std::string& key) {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  throw DataError("checkpoint header lacks " + key);
}

// ---------------------------------------------------------------------------
// Commands

Command add_generate(CLI::App& app) {
  auto* sub = app.add_subcommand("generate", "Write a synthetic correlated data set");
  sub->footer("Output: data.csv with columns time,target,driver1,... (plus 'uncorrelated' with --append-uncorrelated).");
  auto o = std::make_shared<SyntheticConfig>();
  auto kind = std::make_shared<std::string>("lagged");
  auto uncorrelated = std::make_shared<bool>(false);
  sub->add_option("--kind", *kind, "lagged or independent");
  sub->add_option("--lag", o->lag, "Steps by which the drivers lead the target");
  sub->add_option("--len", o->length, "Series length");
  sub->add_option("--series", o->num_series, "Number of series including the target");
  sub->add_option("--noise", o->noise, "Observation noise standard deviation");
  sub->add_option("--seed", o->seed, "Generator seed");
  add_flag(*sub, "--append-uncorrelated", *uncorrelated, "Append a shuffled surrogate of the target");
  return {sub, [o, kind, uncorrelated](RunContext& ctx) {
            SyntheticConfig cfg = *o;
            cfg.kind = parse_synthetic_kind(*kind);
            CorrelatedSet set = generate_synthetic(cfg);
            if (*uncorrelated) {
              std::vector<TimeSeries> all = set.all();
              TimeSeries u = make_uncorrelated(set.target(), cfg.seed);
              u.id = "uncorrelated";
              all.push_back(std::move(u));
              set = CorrelatedSet(std::move(all));
            }
            const auto path = ctx.output("data.csv");
            write_csv(set, path);
            std::cout << path.string() << '\n';
          }};
}

Command add_train(CLI::App& app) {
  auto* sub = app.add_subcommand("train", "Train a model and write a checkpoint");
  sub->footer(
      "Outputs: model.ckpt (plain-text checkpoint with the normalizer), train_report.tsv\n"
      "(columns epoch j j1 j2 val_j1, then '# best_epoch=... stop=...').");
  auto d = std::make_shared<DataOptions>();
  auto m = std::make_shared<ModelOptions>();
  auto t = std::make_shared<TrainOptions>();
  auto seed = std::make_shared<std::uint64_t>(0);
  d->add(*sub);
  m->add(*sub, true);
  t->add(*sub);
  sub->add_option("--seed", *seed, "Initialization and shuffling seed");
  return {sub, [d, m, t, seed](RunContext& ctx) {
            m->check(d->series);
            t->config(*seed);
            const CorrelatedSet set = d->load(ctx);
            Fitted f = fit(set, *m, *t, *seed);
            save_checkpoint(*f.model, f.normalizer, ctx.output("model.ckpt"));
            write_text(ctx.output("train_report.tsv"), report_text(f.report));
            std::cout << "best_epoch=" << f.report.best_epoch << " best_val_j1=" << std::setprecision(17)
                      << f.report.best_val_j1 << " stop=" << to_string(f.report.stop) << '\n';
            throw_if_diverged(f.report);
          }};
}

Command add_forecast(CLI::App& app) {
  auto* sub = app.add_subcommand("forecast", "Forecast p steps from one input window");
  sub->footer("Output: forecast.tsv with columns step value (p rows, original units); also echoed to stdout.");
  auto d = std::make_shared<DataOptions>();
  auto checkpoint = std::make_shared<std::string>();
  auto at = std::make_shared<Index>(-1);
  sub->add_option("--checkpoint", *checkpoint, "Checkpoint written by train or gridsearch")->required();
  d->add(*sub);
  sub->add_option("--at", *at, "Index of the window's first step; default: the last l steps");
  return {sub, [d, checkpoint, at](RunContext& ctx) {
            ctx.record_input("checkpoint", *checkpoint);
            const LoadedCheckpoint loaded = load_checkpoint(*checkpoint);
            const HeaderFields fields = loaded.model->header_fields();
            const Index expected = std::stol(field(fields, "num_series"));
            const Index l = std::stol(field(fields, "input_length"));
            DataOptions opts = *d;
            if (opts.series == 0) {
              const CorrelatedSet all = opts.load(ctx);
              if (all.size() < expected)
                throw DataError("checkpoint expects |X|=" + std::to_string(expected) + " input series, input has " +
                                std::to_string(all.size()));
              opts.series = expected;
            } else if (opts.series != expected) {
              throw DataError("checkpoint expects |X|=" + std::to_string(expected) + " input series, --series is " +
                              std::to_string(opts.series));
            }
            const CorrelatedSet set = opts.load(ctx);
            const Index start = *at < 0 ? set.length() - l : *at;
            if (start < 0 || start + l > set.length())
              throw UsageError("window [" + std::to_string(start) + ", " + std::to_string(start + l) +
                               ") lies outside the " + std::to_string(set.length()) + "-step input");
            Segment window{start, set.matrix().middleCols(start, l)};
            const Normalizer norm = loaded.normalizer.value_or(
                Normalizer(Vector<double>::Zero(set.size()), Vector<double>::Zero(set.size())));
            const Tensor input = Tensor::from_matrix(norm.transform(window).values);
            const Vector<double> values = norm.inverse(0, loaded.model->forecast(input).values);
            std::ostringstream out;
            out << "step\tvalue\n";
            char buf[64];
            for (Index s = 0; s < values.size(); ++s) {
              std::snprintf(buf, sizeof buf, "%.17g", values(s));
              out << s + 1 << '\t' << buf << '\n';
            }
            write_text(ctx.output("forecast.tsv"), out.str());
            std::cout << out.str();
          }};
}

Command add_evaluate(CLI::App& app) {
  auto* sub = app.add_subcommand("evaluate", "Train and score methods on the held-out tail of a data set");
  sub->footer(
      "Outputs: report.tsv (method |X| l p rmse_mean rmse_std mape_mean mape_std seeds notes;\n"
      "mean/std over windows x seeds, per-seed pooled values in notes), predictions_<method>.tsv\n"
      "(seed offset step predicted truth) and train_<method>_seed<k>.tsv for trained methods.");
  auto d = std::make_shared<DataOptions>();
  auto m = std::make_shared<ModelOptions>();
  auto t = std::make_shared<TrainOptions>();
  auto methods = std::make_shared<std::string>("crnn");
  auto seeds = std::make_shared<std::string>("0");
  auto overlapping = std::make_shared<bool>(false);
  auto alpha = std::make_shared<double>(kDefaultEwmaAlpha);
  d->add(*sub);
  m->add(*sub, false);
  t->add(*sub);
  sub->add_option("--method", *methods, "Comma-separated: yesterday, ewma, rnn, lstm, crnn, aecrnn");
  sub->add_option("--seeds", *seeds, "Seeds, e.g. 0,1,2 or 0-4");
  add_flag(*sub, "--overlapping", *overlapping, "Score stride-1 test windows instead of non-overlapping ones");
  sub->add_option("--ewma-alpha", *alpha, "EWMA smoothing factor");
  return {sub, [=](RunContext& ctx) {
            std::vector<Method> list;
            for (const auto& name : split_list(*methods)) list.push_back(parse_method(name));
            if (list.empty()) throw UsageError("--method: no methods given");
            ExperimentSpec spec;
            spec.input_length = m->l;
            spec.horizon = m->p;
            spec.seeds = parse_seeds(*seeds);
            spec.model = m->config(1, 0);
            spec.training = t->config(0);
            spec.ewma_alpha = *alpha;
            spec.baseline_inputs = parse_baseline_inputs(m->inputs);
            spec.train_fraction = t->train_fraction;
            spec.validation_fraction = t->validation_fraction;
            spec.overlapping_test_windows = *overlapping;
            const CorrelatedSet set = d->load(ctx);
            spec.num_series = set.size();
            if (std::find(list.begin(), list.end(), Method::crnn) != list.end() ||
                std::find(list.begin(), list.end(), Method::aecrnn) != list.end())
              spec.model_config(0).validate();

            std::ostringstream table;
            write_report_header(table);
            std::optional<std::string> diverged;
            for (Method method : list) {
              spec.method = method;
              const MetricReport report = run_experiment(spec, set);
              write_report_row(report, table);
              std::ostringstream dump;
              write_prediction_dump(report, dump);
              write_text(ctx.output("predictions_" + report.method + ".tsv"), dump.str());
              for (const auto& s : report.seeds) {
                if (!s.training) continue;
                write_text(ctx.output("train_" + report.method + "_seed" + std::to_string(s.seed) + ".tsv"),
                           report_text(*s.training));
                if (s.training->stop == StopReason::diverged && !diverged)
                  diverged = report.method + " seed " + std::to_string(s.seed) + ": " + s.training->message;
              }
            }
            write_text(ctx.output("report.tsv"), table.str());
            std::cout << table.str();
            if (diverged) throw ExitError(kExitNumeric, "training diverged for " + *diverged);
          }};
}

struct GridCell {
  Index stages = 0, filters = 0, filter_size = 0, hidden = 0;
  bool ok = false;
  int exit_code = 0;
  std::string reason;
  std::unique_ptr<TrainableModel> model;
  TrainReport report;
};

Command add_gridsearch(CLI::App& app) {
  auto* sub = app.add_subcommand("gridsearch", "Train every solution-parameter cell and rank by validation J1");
  sub->footer(
      "Grid file: key=value lines stages=..., filters=..., filter_size=..., hidden=... (comma lists).\n"
      "Outputs: gridsearch.tsv (rank stages filters filter_size hidden status val_j1 best_epoch epochs reason;\n"
      "FAILED cells last), best.ckpt and best_train_report.tsv.");
  auto d = std::make_shared<DataOptions>();
  auto m = std::make_shared<ModelOptions>();
  auto t = std::make_shared<TrainOptions>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto grid_file = std::make_shared<std::string>();
  auto g_stages = std::make_shared<std::string>(join(kStageGrid));
  auto g_filters = std::make_shared<std::string>(join(kFilterGrid));
  auto g_sizes = std::make_shared<std::string>(join(kFilterSizeGrid));
  auto g_hidden = std::make_shared<std::string>(join(kHiddenGrid));
  auto jobs = std::make_shared<unsigned>(1);
  d->add(*sub);
  m->add(*sub, true, false);
  t->add(*sub);
  sub->add_option("--seed", *seed, "Initialization and shuffling seed for every cell");
  sub->add_option("--grid", *grid_file, "Grid file overriding the built-in ranges");
  sub->add_option("--grid-stages", *g_stages, "Stage counts");
  sub->add_option("--grid-filters", *g_filters, "Filter counts");
  sub->add_option("--grid-filter-sizes", *g_sizes, "Filter sizes");
  sub->add_option("--grid-hidden", *g_hidden, "Hidden sizes");
  sub->add_option("--jobs", *jobs, "Cells trained in parallel")->check(CLI::PositiveNumber);
  return {sub, [=](RunContext& ctx) {
            if (m->is_baseline()) throw UsageError("gridsearch applies to crnn and aecrnn");
            parse_model_kind(m->model);
            std::string stages = *g_stages, filters = *g_filters, sizes = *g_sizes, hidden = *g_hidden;
            if (!grid_file->empty()) {
              ctx.record_input("grid", *grid_file);
              for (const auto& [k, v] : read_key_values(*grid_file)) {
                if (k == "stages") stages = v;
                else if (k == "filters") filters = v;
                else if (k == "filter_size") sizes = v;
                else if (k == "hidden") hidden = v;
                else throw UsageError("grid file: unknown key '" + k + "'");
              }
            }
            std::vector<GridCell> cells;
            for (Index s : parse_index_list(stages, "stages"))
              for (Index f : parse_index_list(filters, "filters"))
                for (Index k : parse_index_list(sizes, "filter_size"))
                  for (Index h : parse_index_list(hidden, "hidden")) {
                    GridCell cell;
                    cell.stages = s;
                    cell.filters = f;
                    cell.filter_size = k;
                    cell.hidden = h;
                    cells.push_back(std::move(cell));
                  }
            t->config(*seed);
            const CorrelatedSet set = d->load(ctx);

            std::atomic<std::size_t> next{0};
            auto worker = [&] {
              for (std::size_t i = next++; i < cells.size(); i = next++) {
                GridCell& cell = cells[i];
                ModelOptions cm = *m;
                cm.stages = cell.stages;
                cm.filters = cell.filters;
                cm.filter_size = cell.filter_size;
                cm.hidden = cell.hidden;
                try {
                  cm.config(set.size(), *seed).validate();
                  Fitted f = fit(set, cm, *t, *seed);
                  cell.report = std::move(f.report);
                  cell.model = std::move(f.model);
                  cell.ok = cell.report.stop != StopReason::diverged;
                  if (!cell.ok) {
                    cell.exit_code = kExitNumeric;
                    cell.reason = "diverged: " + cell.report.message;
                  }
                } catch (const UsageError& e) {
                  cell.exit_code = kExitUsage;
                  cell.reason = e.what();
                } catch (const std::exception& e) {
                  cell.exit_code = kExitData;
                  cell.reason = e.what();
                }
              }
            };
            std::vector<std::thread> pool;
            for (unsigned j = 1; j < *jobs; ++j) pool.emplace_back(worker);
            worker();
            for (auto& th : pool) th.join();

            std::vector<std::size_t> order(cells.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
              if (cells[a].ok != cells[b].ok) return cells[a].ok;
              return cells[a].ok && cells[a].report.best_val_j1 < cells[b].report.best_val_j1;
            });
            std::ostringstream table;
            table << "rank\tstages\tfilters\tfilter_size\thidden\tstatus\tval_j1\tbest_epoch\tepochs\treason\n"
                  << std::setprecision(17);
            Index rank = 0;
            for (std::size_t i : order) {
              const GridCell& c = cells[i];
              table << (c.ok ? std::to_string(++rank) : "-") << '\t' << c.stages << '\t' << c.filters << '\t'
                    << c.filter_size << '\t' << c.hidden << '\t' << (c.ok ? "OK" : "FAILED") << '\t';
              if (c.model) {
                table << c.report.best_val_j1 << '\t' << c.report.best_epoch << '\t' << c.report.epochs.size();
              } else {
                table << "-\t-\t-";
              }
              table << '\t' << (c.reason.empty() ? "-" : c.reason) << '\n';
            }
            write_text(ctx.output("gridsearch.tsv"), table.str());
            ctx.note("cells", std::to_string(cells.size()));
            ctx.note("failed", std::to_string(cells.size() - static_cast<std::size_t>(rank)));
            std::cout << "cells=" << cells.size() << " ok=" << rank << '\n';
            if (rank == 0) {
              const GridCell& first = cells.front();
              throw ExitError(first.exit_code, "every grid cell failed; first: " + first.reason);
            }
            const GridCell& best = cells[order.front()];
            save_checkpoint(*best.model, prepare_split(set, m->l, m->p, t->train_fraction, t->validation_fraction)
                                             .normalizer,
                            ctx.output("best.ckpt"));
            write_text(ctx.output("best_train_report.tsv"), report_text(best.report));
          }};
}

Command add_robustness(CLI::App& app) {
  auto* sub = app.add_subcommand("robustness", "CRNN vs AECRNN MAPE with a correlated and an uncorrelated series");
  sub->footer(
      "Uses the target and the first correlated column (see --columns). Outputs: robustness.tsv\n"
      "(seed condition crnn_mape aecrnn_mape) and summary.tsv (seed crnn_degradation aecrnn_degradation\n"
      "aecrnn_more_robust, then '# aecrnn_more_robust=k/n').");
  auto d = std::make_shared<DataOptions>();
  auto m = std::make_shared<ModelOptions>();
  auto t = std::make_shared<TrainOptions>();
  auto seeds = std::make_shared<std::string>("0");
  d->add(*sub);
  m->add(*sub, false);
  t->add(*sub);
  sub->add_option("--seeds", *seeds, "Seeds, e.g. 0-4");
  return {sub, [=](RunContext& ctx) {
            ExperimentSpec spec;
            spec.input_length = m->l;
            spec.horizon = m->p;
            spec.model = m->config(1, 0);
            spec.model_config(0).validate();
            spec.training = t->config(0);
            spec.train_fraction = t->train_fraction;
            spec.validation_fraction = t->validation_fraction;
            const auto seed_list = parse_seeds(*seeds);
            DataOptions opts = *d;
            opts.series = 2;
            const CorrelatedSet set = opts.load(ctx);

            std::ostringstream table, summary;
            table << "seed\tcondition\tcrnn_mape\taecrnn_mape\n" << std::setprecision(10);
            summary << "seed\tcrnn_degradation\taecrnn_degradation\taecrnn_more_robust\n" << std::setprecision(10);
            int wins = 0;
            for (std::uint64_t s : seed_list) {
              const RobustnessTable r = robustness_experiment(set.series(0), set.series(1), s, spec);
              for (std::size_t row = 0; row < 3; ++row)
                table << s << '\t' << RobustnessTable::kRows[row] << '\t' << r.mape[row][0] << '\t' << r.mape[row][1]
                      << '\n';
              const bool win = r.degradation(1) < r.degradation(0);
              wins += win;
              summary << s << '\t' << r.degradation(0) << '\t' << r.degradation(1) << '\t' << (win ? "yes" : "no")
                      << '\n';
            }
            summary << "# aecrnn_more_robust=" << wins << '/' << seed_list.size() << '\n';
            write_text(ctx.output("robustness.tsv"), table.str());
            write_text(ctx.output("summary.tsv"), summary.str());
            std::cout << table.str() << summary.str();
          }};
}

Command add_gradcheck(CLI::App& app) {
  auto* sub = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  sub->footer("Output: gradcheck.txt with passed, max_relative_error, worst_parameter, checked, failing.");
  auto m = std::make_shared<ModelOptions>();
  auto small = std::make_shared<bool>(false);
  auto series = std::make_shared<Index>(2);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto tolerance = std::make_shared<double>(1e-5);
  auto step = std::make_shared<double>(1e-6);
  m->add(*sub, true);
  add_flag(*sub, "--small", *small, "|X|=2, l=8, p=2, 1 stage, 2 filters of size 3, h=3");
  sub->add_option("--series", *series, "|X|");
  sub->add_option("--seed", *seed, "Parameter and sample seed");
  sub->add_option("--tolerance", *tolerance, "Maximum relative error");
  sub->add_option("--step", *step, "Central difference step");
  return {sub, [=](RunContext& ctx) {
            ModelOptions opts = *m;
            Index num_series = *series;
            if (*small) {
              num_series = 2;
              opts.l = 8;
              opts.p = 2;
              opts.stages = 1;
              opts.filters = 2;
              opts.filter_size = 3;
              opts.hidden = 3;
            }
            std::unique_ptr<TrainableModel> model;
            if (opts.is_baseline()) {
              model = std::make_unique<RecurrentBaseline>(opts.baseline_config(num_series, *seed));
            } else {
              model = std::make_unique<CrnnModel>(opts.config(num_series, *seed));
            }
            std::mt19937_64 rng(*seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Vector<double> values(num_series * opts.l), target(opts.p);
            for (auto& v : values) v = u(rng);
            for (auto& v : target) v = u(rng);
            const WindowSample sample{0, Tensor({num_series, opts.l}, values), target};
            const GradcheckReport r = gradcheck(*model, sample, *tolerance, *step);
            std::ostringstream out;
            out << std::setprecision(6) << "passed=" << (r.passed ? "true" : "false")
                << " max_relative_error=" << r.max_relative_error << " worst_parameter=" << r.worst_parameter
                << " checked=" << r.checked << " failing=";
            for (std::size_t i = 0; i < r.failing.size(); ++i) out << (i ? "," : "") << r.failing[i];
            out << '\n';
            write_text(ctx.output("gradcheck.txt"), out.str());
            std::cout << out.str();
            if (!r.passed) throw ExitError(kExitNumeric, "gradient check failed: " + out.str().substr(0, out.str().size() - 1));
          }};
}

}  // namespace

std::vector<Command> add_commands(CLI::App& app) {
  return {add_generate(app), add_train(app),      add_forecast(app), add_evaluate(app),
          add_gridsearch(app), add_robustness(app), add_gradcheck(app)};
}

}  // namespace ctsf::cli
