#include "tats/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "tats/error.hpp"
#include "tats/random.hpp"

namespace tats::harness {

namespace {

using Row = std::vector<std::string>;

// RFC 4180: quoted fields may hold commas, newlines and doubled quotes.
std::vector<Row> split_csv(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool quoted = false;
    bool pending = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; pending = true; break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                pending = true;
                break;
            case '\r': break;
            case '\n':
                if (pending || !field.empty() || !row.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                row.clear();
                field.clear();
                pending = false;
                break;
            default: field += c; pending = true;
        }
    }
    if (quoted) fail(ErrorCode::ParseError, "unterminated quoted field");
    if (pending || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool is_time_name(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    return name == "t" || name == "time" || name == "timestamp" || name == "date";
}

}  // namespace

CsvTable parse_csv(std::string_view content, const std::optional<std::string>& text_column) {
    const auto rows = split_csv(content);
    if (rows.empty()) fail(ErrorCode::ParseError, "empty CSV");
    Row header;
    for (const auto& h : rows.front()) header.push_back(trim(h));

    std::optional<std::size_t> time_col;
    if (is_time_name(header.front())) time_col = 0;
    std::optional<std::size_t> text_col;
    if (text_column) {
        const auto it = std::find(header.begin(), header.end(), *text_column);
        if (it == header.end()) fail(ErrorCode::MissingColumn, "text column '" + *text_column + "' not in header");
        text_col = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != time_col && c != text_col) value_cols.push_back(c);
    if (value_cols.empty()) fail(ErrorCode::MissingColumn, "no numeric value columns");

    const std::size_t n_rows = rows.size() - 1;
    Matrix values(n_rows, value_cols.size());
    std::vector<double> times;
    bool numeric_time = time_col.has_value();
    std::vector<std::string> texts;
    for (std::size_t r = 0; r < n_rows; ++r) {
        const Row& row = rows[r + 1];
        const std::size_t line = r + 2;
        if (row.size() != header.size())
            fail(ErrorCode::ParseError, "row " + std::to_string(line) + ": expected " +
                                            std::to_string(header.size()) + " fields, got " +
                                            std::to_string(row.size()));
        for (std::size_t j = 0; j < value_cols.size(); ++j) {
            const std::size_t c = value_cols[j];
            const auto v = parse_number(row[c]);
            if (!v)
                fail(ErrorCode::ParseError, "row " + std::to_string(line) + ", column " + std::to_string(c + 1) +
                                                " ('" + header[c] + "'): cannot parse '" + row[c] + "'");
            values(r, j) = *v;
        }
        if (numeric_time) {
            const auto t = parse_number(row[*time_col]);
            if (t) times.push_back(*t);
            else numeric_time = false;
        }
        if (text_col) texts.push_back(row[*text_col]);
    }
    std::optional<std::vector<double>> stamps;
    if (numeric_time) stamps = std::move(times);

    CsvTable out{data::TimeSeries(std::move(values), std::move(stamps)), {}, std::nullopt};
    for (auto c : value_cols) out.value_columns.push_back(header[c]);
    if (text_col) out.texts = std::move(texts);
    return out;
}

CsvTable load_csv(const std::filesystem::path& path, const std::optional<std::string>& text_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), text_column);
}

void write_csv(const data::TimeSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    const auto& x = series.values();
    out << "t";
    for (std::size_t c = 0; c < x.cols(); ++c) out << ",x" << c;
    out << '\n' << std::setprecision(17);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        if (series.timestamps()) out << (*series.timestamps())[r];
        else out << r;
        for (std::size_t c = 0; c < x.cols(); ++c) out << ',' << x(r, c);
        out << '\n';
    }
}

SyntheticData make_synthetic(std::size_t length, std::uint64_t seed, const SyntheticOptions& opt) {
    require(length >= 200, ErrorCode::InvalidArgument, "synthetic series needs T >= 200");
    require(opt.d_text >= 2, ErrorCode::InvalidArgument, "synthetic d_text must be >= 2");
    Rng rng(seed, stream::kSynthetic);

    constexpr std::size_t burn_in = 64;
    const std::size_t total = length + burn_in;
    std::vector<double> h(total), x(total, 0.0);
    double r = 0.0;
    for (std::size_t t = 0; t < total; ++t) {
        r = opt.driver_ar * r + rng.normal(0.0, opt.driver_sigma);
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / opt.period;
        h[t] = std::cos(phase) + r;
    }
    for (std::size_t t = 1; t < total; ++t) {
        const double drive = t >= opt.lead ? h[t - opt.lead] : 0.0;
        x[t] = opt.series_ar * x[t - 1] + drive + rng.normal(0.0, opt.series_sigma);
    }

    Matrix w(opt.d_text, 2);
    for (auto& v : w.data()) v = rng.normal(0.0, 1.0);

    Matrix values(length, 1), emb(length, opt.d_text);
    std::vector<double> driver(length), stamps(length);
    for (std::size_t i = 0; i < length; ++i) {
        const std::size_t t = i + burn_in;
        values(i, 0) = x[t];
        driver[i] = h[t];
        stamps[i] = static_cast<double>(i);
        for (std::size_t k = 0; k < opt.d_text; ++k)
            emb(i, k) = w(k, 0) * h[t] + w(k, 1) * h[t - 1] + rng.normal(0.0, opt.embedding_sigma);
    }
    data::MultimodalDataset ds(data::TimeSeries(std::move(values), std::move(stamps)),
                               data::EmbeddingSequence(std::move(emb)), data::chronological_split(length));
    return {std::move(ds), std::move(driver)};
}

data::MultimodalDataset make_synthetic_hidden_driver(std::size_t length, std::uint64_t seed) {
    return make_synthetic(length, seed).dataset;
}

Task parse_task(std::string_view s) {
    if (s == "forecast") return Task::Forecast;
    if (s == "impute") return Task::Impute;
    fail(ErrorCode::InvalidArgument, "unknown task '" + std::string(s) + "'");
}

std::string to_string(Task t) { return t == Task::Forecast ? "forecast" : "impute"; }

Mode parse_mode(std::string_view s) {
    if (s == "numerical_only") return Mode::NumericalOnly;
    if (s == "tats") return Mode::Tats;
    if (s == "text_shuffle") return Mode::TextShuffle;
    if (s == "text_only_1d") return Mode::TextOnly1d;
    fail(ErrorCode::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::NumericalOnly: return "numerical_only";
        case Mode::Tats: return "tats";
        case Mode::TextShuffle: return "text_shuffle";
        case Mode::TextOnly1d: return "text_only_1d";
    }
    return "?";
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json modes = nlohmann::json::array();
    for (auto m : cfg.modes) modes.push_back(to_string(m));
    return {{"task", to_string(cfg.task)},
            {"model", models::to_string(cfg.model)},
            {"seq_len", cfg.seq_len},
            {"pred_lens", cfg.pred_lens},
            {"d_mapped", cfg.d_mapped},
            {"projector_hidden", cfg.projector_hidden},
            {"dropout", cfg.dropout},
            {"hidden", cfg.hidden},
            {"dlinear_kernel", cfg.dlinear_kernel},
            {"channel_mixing", cfg.channel_mixing},
            {"use_norm", cfg.use_norm},
            {"train", framework::to_json(cfg.train)},
            {"seeds", cfg.seeds},
            {"modes", modes},
            {"missing_ratio", cfg.missing_ratio}};
}

const CellResult& ResultsDocument::cell(std::size_t pred_len, std::uint64_t seed, Mode mode) const {
    for (const auto& c : cells)
        if (c.key.pred_len == pred_len && c.key.seed == seed && c.key.mode == mode) return c;
    fail(ErrorCode::InvalidArgument, "no such cell");
}

const ModeAggregate& ResultsDocument::aggregate(Mode mode) const {
    for (const auto& a : aggregates)
        if (a.mode == mode) return a;
    fail(ErrorCode::InvalidArgument, "mode " + to_string(mode) + " was not run");
}

std::size_t resolve_jobs(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TATS_JOBS")) {
        std::size_t v = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc{} && ptr == s.data() + s.size() && v > 0) return v;
    }
    return 1;
}

Matrix mean_fill(const data::ImputeSample& sample) {
    const Matrix& x = sample.values;
    const Matrix& m = sample.mask;
    Matrix out = x;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double sum = 0.0, count = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            sum += m(r, c) * x(r, c);
            count += m(r, c);
        }
        const double mean = count > 0 ? sum / count : 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r)
            if (m(r, c) == 0.0) out(r, c) = mean;
    }
    return out;
}

namespace {

framework::TatsConfig tats_config(const ExperimentConfig& cfg, const data::MultimodalDataset& ds, Mode mode,
                                  std::size_t pred_len) {
    framework::TatsConfig t;
    t.n_vars = ds.series().variables();
    t.d_text = ds.embeddings().dim();
    const bool text = mode == Mode::Tats || mode == Mode::TextShuffle;
    t.d_mapped = text ? cfg.d_mapped : 0;
    t.projector_hidden = cfg.projector_hidden;
    t.projector_dropout = cfg.dropout;
    t.use_norm = mode == Mode::TextOnly1d ? false : cfg.use_norm;
    t.model = cfg.model;
    t.base.seq_len = cfg.seq_len;
    t.base.pred_len = cfg.task == Task::Forecast ? pred_len : cfg.seq_len;
    t.base.channel_mixing = cfg.channel_mixing;
    t.base.dlinear_kernel = cfg.dlinear_kernel;
    t.base.hidden = cfg.hidden;
    t.base.dropout = cfg.dropout;
    return t;
}

data::MultimodalDataset with_shuffled_text(const data::MultimodalDataset& ds, std::uint64_t seed) {
    return data::MultimodalDataset(
        ds.series(),
        data::EmbeddingSequence(transport::permute_rows(ds.embeddings().vectors(), seed, stream::kTextShuffle)),
        ds.split());
}

// The first variable's input history is replaced by the first embedding dimension.
void text_only_1d(std::vector<data::WindowSample>& windows) {
    for (auto& w : windows)
        for (std::size_t r = 0; r < w.input_series.rows(); ++r) w.input_series(r, 0) = w.input_embeddings(r, 0);
}

template <typename Model>
void record_training(CellResult& out, Model& model, const framework::TrainResult& tr) {
    out.epochs_run = tr.history.size();
    out.best_epoch = tr.best_epoch;
    out.best_val_loss = tr.best_val_loss;
    double secs = 0.0;
    for (const auto& e : tr.history) secs += e.seconds;
    out.seconds_per_epoch = tr.history.empty() ? 0.0 : secs / static_cast<double>(tr.history.size());
    out.projector_parameters = model.projector_parameter_count();
    out.total_parameters = model.base_parameter_count() + out.projector_parameters;
    out.projector_share =
        static_cast<double>(out.projector_parameters) / static_cast<double>(out.total_parameters);
}

CellResult run_forecast_cell(const data::MultimodalDataset& base_ds, const ExperimentConfig& cfg, CellKey key) {
    const data::MultimodalDataset ds =
        key.mode == Mode::TextShuffle ? with_shuffled_text(base_ds, key.seed) : base_ds;
    auto train = data::make_windows(ds, cfg.seq_len, key.pred_len, data::Split::Train);
    auto val = data::make_windows(ds, cfg.seq_len, key.pred_len, data::Split::Val);
    auto test = data::make_windows(ds, cfg.seq_len, key.pred_len, data::Split::Test);
    if (key.mode == Mode::TextOnly1d) {
        text_only_1d(train);
        text_only_1d(val);
        text_only_1d(test);
    }
    framework::AugmentedForecaster model(tats_config(cfg, ds, key.mode, key.pred_len), key.seed);
    auto tc = cfg.train;
    tc.seed = key.seed;
    const auto tr = framework::train_forecast(model, train, val, tc);

    CellResult out;
    out.key = key;
    record_training(out, model, tr);
    metrics::Accumulator acc;
    for (const auto& w : test) acc.add(model.forecast(w), w.target);
    out.test = acc.report();
    return out;
}

CellResult run_impute_cell(const data::MultimodalDataset& base_ds, const ExperimentConfig& cfg, CellKey key) {
    if (key.mode == Mode::TextOnly1d)
        fail(ErrorCode::InvalidArgument, "text_only_1d is defined for forecasting only");
    const data::MultimodalDataset ds =
        key.mode == Mode::TextShuffle ? with_shuffled_text(base_ds, key.seed) : base_ds;
    const auto mask = data::generate_mask(ds.length(), ds.series().variables(), cfg.missing_ratio, key.seed);
    const auto train = data::make_impute_windows(ds, mask, cfg.seq_len, data::Split::Train);
    const auto val = data::make_impute_windows(ds, mask, cfg.seq_len, data::Split::Val);
    const auto test = data::make_impute_windows(ds, mask, cfg.seq_len, data::Split::Test);

    framework::AugmentedImputer model(tats_config(cfg, ds, key.mode, 0), key.seed);
    auto tc = cfg.train;
    tc.seed = key.seed;
    const auto tr = framework::train_impute(model, train, val, tc);

    CellResult out;
    out.key = key;
    record_training(out, model, tr);
    metrics::Accumulator acc, fill;
    for (const auto& w : test) {
        Matrix missing(w.mask.rows(), w.mask.cols());
        for (std::size_t i = 0; i < missing.size(); ++i) missing.data()[i] = w.mask.data()[i] == 0.0 ? 1.0 : 0.0;
        acc.add(model.impute(w), w.values, missing);
        fill.add(mean_fill(w), w.values, missing);
    }
    out.test = acc.report();
    out.mean_fill = fill.report();
    return out;
}

}  // namespace

ResultsDocument run_experiment(const data::MultimodalDataset& ds, const ExperimentConfig& cfg) {
    require(!cfg.seeds.empty(), ErrorCode::InvalidArgument, "at least one seed is required");
    require(!cfg.modes.empty(), ErrorCode::InvalidArgument, "at least one mode is required");
    std::vector<std::size_t> pred_lens = cfg.pred_lens;
    if (cfg.task == Task::Impute) pred_lens = {0};
    require(!pred_lens.empty(), ErrorCode::InvalidArgument, "at least one pred_len is required");
    if (cfg.modes.end() != std::find(cfg.modes.begin(), cfg.modes.end(), Mode::TextOnly1d) &&
        cfg.task == Task::Impute)
        fail(ErrorCode::InvalidArgument, "text_only_1d is defined for forecasting only");

    std::vector<CellKey> keys;
    for (auto h : pred_lens)
        for (auto s : cfg.seeds)
            for (auto m : cfg.modes) keys.push_back({h, s, m});

    std::vector<CellResult> results(keys.size());
    std::vector<std::exception_ptr> errors(keys.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < keys.size(); i = next++) {
            try {
                results[i] = cfg.task == Task::Forecast ? run_forecast_cell(ds, cfg, keys[i])
                                                        : run_impute_cell(ds, cfg, keys[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::min(resolve_jobs(cfg.jobs), keys.size());
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (!errors[i]) continue;
        const std::string where = "cell (pred_len=" + std::to_string(keys[i].pred_len) +
                                  ", seed=" + std::to_string(keys[i].seed) + ", mode=" + to_string(keys[i].mode) +
                                  "): ";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw Error(e.code(), where + e.message());
        } catch (const std::exception& e) {
            throw std::runtime_error(where + e.what());
        }
    }

    ResultsDocument doc{cfg, std::move(results), {}};
    for (auto m : cfg.modes) {
        ModeAggregate a;
        a.mode = m;
        double n = 0.0, fill = 0.0;
        for (const auto& c : doc.cells) {
            if (c.key.mode != m) continue;
            a.mse += c.test.mse;
            a.mae += c.test.mae;
            if (c.mean_fill) fill += c.mean_fill->mse;
            n += 1.0;
        }
        a.mse /= n;
        a.mae /= n;
        if (cfg.task == Task::Impute) a.mean_fill_mse = fill / n;
        doc.aggregates.push_back(a);
    }
    const auto base = std::find_if(doc.aggregates.begin(), doc.aggregates.end(),
                                   [](const ModeAggregate& a) { return a.mode == Mode::NumericalOnly; });
    if (base != doc.aggregates.end()) {
        const ModeAggregate b = *base;
        for (auto& a : doc.aggregates) {
            a.promotion_mse = metrics::promotion_percent(b.mse, a.mse);
            a.promotion_mae = metrics::promotion_percent(b.mae, a.mae);
        }
    }
    return doc;
}

nlohmann::json to_json(const ResultsDocument& doc, bool include_timing) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : doc.cells) {
        nlohmann::json j = {{"pred_len", c.key.pred_len},
                            {"seed", c.key.seed},
                            {"mode", to_string(c.key.mode)},
                            {"test", metrics::to_json(c.test)},
                            {"epochs_run", c.epochs_run},
                            {"best_epoch", c.best_epoch},
                            {"best_val_loss", c.best_val_loss},
                            {"parameters", {{"total", c.total_parameters},
                                            {"projector", c.projector_parameters},
                                            {"projector_share", c.projector_share}}}};
        if (c.mean_fill) j["mean_fill"] = metrics::to_json(*c.mean_fill);
        if (include_timing) j["timing"] = {{"seconds_per_epoch", c.seconds_per_epoch}};
        cells.push_back(std::move(j));
    }
    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : doc.aggregates) {
        nlohmann::json j = {{"mode", to_string(a.mode)}, {"mse", a.mse}, {"mae", a.mae}};
        if (a.promotion_mse) j["promotion_mse_percent"] = *a.promotion_mse;
        if (a.promotion_mae) j["promotion_mae_percent"] = *a.promotion_mae;
        if (a.mean_fill_mse) {
            j["mean_fill_mse"] = *a.mean_fill_mse;
            j["improvement_over_mean_fill_percent"] = metrics::promotion_percent(*a.mean_fill_mse, a.mse);
        }
        aggs.push_back(std::move(j));
    }
    return {{"schema", "tats-results/1"}, {"config", to_json(doc.config)}, {"cells", cells}, {"aggregates", aggs}};
}

namespace {

nlohmann::json spectrum_json(const spectral::Spectrum& s) {
    return {{"frequencies", s.frequencies}, {"amplitudes", s.amplitudes}};
}

}  // namespace

nlohmann::json to_json(const spectral::CtrReport& r) {
    nlohmann::json series = nlohmann::json::array();
    for (const auto& s : r.series_spectra) series.push_back(spectrum_json(s));
    nlohmann::json top = nlohmann::json::array();
    for (const auto& m : r.top_text_frequencies)
        top.push_back({{"frequency", m.peak.frequency},
                       {"amplitude", m.peak.amplitude},
                       {"matched", m.matched},
                       {"matched_variables", m.matched_variables}});
    return {{"max_lag", r.max_lag},
            {"series_spectra", series},
            {"text_spectrum", spectrum_json(r.text_spectrum)},
            {"top_text_frequencies", top},
            {"matched_count", r.matched_count()}};
}

nlohmann::json to_json(const transport::ShuffleReport& r) {
    return {{"original", r.original},
            {"ts_shuffled", r.ts_shuffled},
            {"text_shuffled", r.text_shuffled},
            {"ts_shuffled_mean", r.ts_shuffled_mean},
            {"text_shuffled_mean", r.text_shuffled_mean},
            {"ratio_percent", r.ratio_percent}};
}

}  // namespace tats::harness
