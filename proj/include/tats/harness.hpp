#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tats/core_data.hpp"
#include "tats/framework.hpp"
#include "tats/metrics.hpp"
#include "tats/spectral.hpp"
#include "tats/transport.hpp"

namespace tats::harness {

struct CsvTable {
    data::TimeSeries series;
    std::vector<std::string> value_columns;
    std::optional<std::vector<std::string>> texts;
};

/// Header row required. A leading column named t/time/timestamp/date is taken as
/// the time axis (kept only when numeric); every other non-text column must be numeric.
CsvTable parse_csv(std::string_view content, const std::optional<std::string>& text_column = std::nullopt);
CsvTable load_csv(const std::filesystem::path& path, const std::optional<std::string>& text_column = std::nullopt);

void write_csv(const data::TimeSeries& series, const std::filesystem::path& path);

struct SyntheticOptions {
    std::size_t d_text = 16;
    std::size_t lead = 3;          ///< x responds to the driver this many steps later
    double period = 12.0;
    double driver_ar = 0.8;        ///< AR(1) coefficient of the stochastic part of the driver
    double driver_sigma = 0.4;
    double series_ar = 0.5;
    double series_sigma = 0.1;
    double embedding_sigma = 0.05;
};

struct SyntheticData {
    data::MultimodalDataset dataset;
    std::vector<double> driver;  ///< h_t, for oracles
};

/// Periodic driver plus AR noise that reaches the series with a delay and the
/// text embeddings immediately. Requires T >= 200.
SyntheticData make_synthetic(std::size_t length, std::uint64_t seed, const SyntheticOptions& opt = {});
data::MultimodalDataset make_synthetic_hidden_driver(std::size_t length, std::uint64_t seed);

enum class Task { Forecast, Impute };
enum class Mode { NumericalOnly, Tats, TextShuffle, TextOnly1d };

Task parse_task(std::string_view s);
std::string to_string(Task t);
Mode parse_mode(std::string_view s);
std::string to_string(Mode m);

struct ExperimentConfig {
    Task task = Task::Forecast;
    models::ModelKind model = models::ModelKind::Mlp;
    std::size_t seq_len = 24;
    std::vector<std::size_t> pred_lens{6, 12};
    std::size_t d_mapped = 12;
    std::size_t projector_hidden = 0;
    double dropout = 0.1;
    std::size_t hidden = 256;
    std::size_t dlinear_kernel = 25;
    bool channel_mixing = true;
    bool use_norm = true;
    framework::TrainConfig train;  ///< seed is replaced per cell
    std::vector<std::uint64_t> seeds{1};
    std::vector<Mode> modes{Mode::NumericalOnly, Mode::Tats};
    double missing_ratio = 0.25;   ///< impute only
    std::size_t jobs = 0;          ///< 0: TATS_JOBS or 1
};

nlohmann::json to_json(const ExperimentConfig& cfg);

struct CellKey {
    std::size_t pred_len = 0;  ///< 0 for imputation
    std::uint64_t seed = 0;
    Mode mode = Mode::Tats;
};

struct CellResult {
    CellKey key;
    metrics::EvalReport test;
    std::optional<metrics::EvalReport> mean_fill;  ///< impute only
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double seconds_per_epoch = 0.0;
    std::size_t total_parameters = 0;
    std::size_t projector_parameters = 0;
    double projector_share = 0.0;  ///< projector / total
};

struct ModeAggregate {
    Mode mode = Mode::Tats;
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> promotion_mse;  ///< vs numerical_only, percent
    std::optional<double> promotion_mae;
    std::optional<double> mean_fill_mse;
};

struct ResultsDocument {
    ExperimentConfig config;
    std::vector<CellResult> cells;  ///< ordered by (pred_len, seed, mode) as configured
    std::vector<ModeAggregate> aggregates;

    const CellResult& cell(std::size_t pred_len, std::uint64_t seed, Mode mode) const;
    const ModeAggregate& aggregate(Mode mode) const;
};

/// Trains and evaluates every pred_len x seed x mode cell, in parallel up to cfg.jobs.
ResultsDocument run_experiment(const data::MultimodalDataset& ds, const ExperimentConfig& cfg);

/// Per-window observed mean per variable in place of every missing cell.
Matrix mean_fill(const data::ImputeSample& sample);

std::size_t resolve_jobs(std::size_t requested);

nlohmann::json to_json(const ResultsDocument& doc, bool include_timing = true);
nlohmann::json to_json(const spectral::CtrReport& r);
nlohmann::json to_json(const transport::ShuffleReport& r);

}  // namespace tats::harness
