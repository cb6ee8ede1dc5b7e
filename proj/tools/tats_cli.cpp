#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tats/embedding_io.hpp"
#include "tats/error.hpp"
#include "tats/framework.hpp"
#include "tats/harness.hpp"
#include "tats/metrics.hpp"
#include "tats/spectral.hpp"
#include "tats/transport.hpp"

using namespace tats;

namespace {

struct Inputs {
    std::string data;
    std::string emb;
    std::string text_col;
    std::size_t hash_dim = 0;
    std::uint64_t hash_seed = 0;
};

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--data", in.data, "CSV with a header row")->required()->check(CLI::ExistingFile);
    cmd->add_option("--emb", in.emb, "TSEMB1 or CSV embeddings, one row per timestamp");
    cmd->add_option("--text-col", in.text_col, "text column for --hash-embed");
    cmd->add_option("--hash-embed", in.hash_dim, "embed --text-col with the hashing embedder of this width");
    cmd->add_option("--hash-seed", in.hash_seed, "hashing embedder seed");
}

data::EmbeddingSequence hash_embeddings(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed) {
    Matrix m(texts.size(), dim);
    for (std::size_t r = 0; r < texts.size(); ++r) {
        const auto v = embedding::hash_embed(texts[r], dim, seed);
        for (std::size_t c = 0; c < dim; ++c) m(r, c) = v[c];
    }
    return data::EmbeddingSequence(std::move(m));
}

data::MultimodalDataset load_dataset(const Inputs& in) {
    std::optional<std::string> text_col;
    if (!in.text_col.empty()) text_col = in.text_col;
    auto table = harness::load_csv(in.data, text_col);
    std::optional<data::EmbeddingSequence> emb;
    if (!in.emb.empty()) {
        emb = embedding::load_embeddings(in.emb);
    } else if (in.hash_dim > 0) {
        require(table.texts.has_value(), ErrorCode::InvalidArgument, "--hash-embed needs --text-col");
        emb = hash_embeddings(*table.texts, in.hash_dim, in.hash_seed);
    } else {
        fail(ErrorCode::InvalidArgument, "provide --emb, or --text-col with --hash-embed");
    }
    const auto split = data::chronological_split(table.series.length());
    return data::MultimodalDataset(std::move(table.series), std::move(*emb), split);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out << j.dump(2) << '\n';
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        T v{};
        std::istringstream is(item);
        if (!(is >> v) || !is.eof()) fail(ErrorCode::InvalidArgument, std::string(flag) + ": bad entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) fail(ErrorCode::InvalidArgument, std::string(flag) + ": empty list");
    return out;
}

struct TrainFlags {
    Inputs in;
    std::string out = "results.json";
    std::string task = "forecast";
    std::string model = "mlp";
    std::string pred_lens = "6,12";
    std::string seeds = "1";
    std::string modes = "tats";
    harness::ExperimentConfig cfg;
    bool no_norm = false;
    bool channel_shared = false;
    bool no_timing = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool impute) {
    add_inputs(cmd, f.in);
    cmd->add_option("--out", f.out, "results JSON");
    if (!impute) {
        cmd->add_option("--task", f.task, "forecast | impute")->check(CLI::IsMember({"forecast", "impute"}));
        cmd->add_option("--pred-len", f.pred_lens, "comma-separated horizons");
    }
    cmd->add_option("--model", f.model, "linear | dlinear | mlp")->check(CLI::IsMember({"linear", "dlinear", "mlp"}));
    cmd->add_option("--seeds", f.seeds, "comma-separated seeds");
    cmd->add_option("--modes", f.modes, "numerical_only,tats,text_shuffle,text_only_1d");
    cmd->add_option("--seq-len", f.cfg.seq_len);
    cmd->add_option("--d-mapped", f.cfg.d_mapped);
    cmd->add_option("--projector-hidden", f.cfg.projector_hidden, "0 selects max(4*d_mapped, 32)");
    cmd->add_option("--hidden", f.cfg.hidden, "MLP backbone width");
    cmd->add_option("--kernel", f.cfg.dlinear_kernel, "DLinear moving-average kernel");
    cmd->add_option("--dropout", f.cfg.dropout);
    cmd->add_option("--lr", f.cfg.train.lr);
    cmd->add_option("--lr2", f.cfg.train.lr2, "projector learning rate");
    cmd->add_option("--batch", f.cfg.train.batch);
    cmd->add_option("--epochs", f.cfg.train.epochs);
    cmd->add_option("--patience", f.cfg.train.patience);
    cmd->add_option("--missing", f.cfg.missing_ratio, "missing ratio for imputation");
    cmd->add_option("--jobs", f.cfg.jobs, "parallel grid cells (default TATS_JOBS or 1)");
    cmd->add_flag("--no-norm", f.no_norm, "disable instance normalization");
    cmd->add_flag("--channel-shared", f.channel_shared, "one head shared by all channels (linear, dlinear)");
    cmd->add_flag("--no-timing", f.no_timing, "omit wall-clock fields from the results");
}

int run_train(TrainFlags& f, bool impute) {
    auto cfg = f.cfg;
    cfg.task = impute ? harness::Task::Impute : harness::parse_task(f.task);
    cfg.model = models::parse_model_kind(f.model);
    cfg.pred_lens = parse_list<std::size_t>(f.pred_lens, "--pred-len");
    cfg.seeds = parse_list<std::uint64_t>(f.seeds, "--seeds");
    cfg.modes.clear();
    for (const auto& m : parse_list<std::string>(f.modes, "--modes")) cfg.modes.push_back(harness::parse_mode(m));
    cfg.use_norm = !f.no_norm;
    cfg.channel_mixing = !f.channel_shared;

    const auto ds = load_dataset(f.in);
    const auto doc = harness::run_experiment(ds, cfg);
    write_json(f.out, harness::to_json(doc, !f.no_timing));

    std::printf("%-16s %12s %12s %12s\n", "mode", "mse", "mae", "promotion%");
    for (const auto& a : doc.aggregates) {
        std::printf("%-16s %12.6f %12.6f", harness::to_string(a.mode).c_str(), a.mse, a.mae);
        if (a.promotion_mse) std::printf(" %12.2f", *a.promotion_mse);
        if (a.mean_fill_mse) std::printf("   mean-fill mse %.6f", *a.mean_fill_mse);
        std::printf("\n");
    }
    const auto& c = doc.cells.back();
    std::printf("parameters: %zu total, %zu projector (%.2f%%)\n", c.total_parameters, c.projector_parameters,
                100.0 * c.projector_share);
    std::printf("wrote %s\n", f.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Texts as time series: spectral alignment, transport, and text-augmented forecasting"};
    app.require_subcommand(1);

    Inputs ctr_in;
    std::string ctr_out = "ctr.json";
    spectral::CtrConfig ctr_cfg;
    auto* ctr = app.add_subcommand("analyze-ctr", "chronological textual resonance: spectra and frequency matches");
    add_inputs(ctr, ctr_in);
    ctr->add_option("--out", ctr_out);
    ctr->add_option("--top", ctr_cfg.top_l, "text frequencies to match");
    ctr->add_option("--nms-radius", ctr_cfg.nms_radius);
    ctr->add_option("--max-lag", ctr_cfg.max_lag, "0 selects min(T-1, T/2)");
    ctr->add_option("--prominence", ctr_cfg.peak_prominence);

    Inputs tt_in;
    std::string tt_out = "tt.json";
    std::size_t shuffles = 10;
    std::uint64_t tt_seed = 1;
    transport::TtConfig tt_cfg;
    auto* tt = app.add_subcommand("tt-wasserstein", "series/text spectral transport distance and shuffle ratio");
    add_inputs(tt, tt_in);
    tt->add_option("--out", tt_out);
    tt->add_option("--shuffles", shuffles)->check(CLI::PositiveNumber);
    tt->add_option("--seed", tt_seed, "first shuffle seed");
    tt->add_option("--max-lag", tt_cfg.max_lag);

    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "train and evaluate over a pred_len x seed x mode grid");
    add_train_flags(train, train_flags, false);

    TrainFlags impute_flags;
    impute_flags.modes = "numerical_only,tats";
    auto* impute = app.add_subcommand("impute", "imputation experiment with a mean-fill reference");
    add_train_flags(impute, impute_flags, true);

    std::string ev_pred, ev_target, ev_mask, ev_out = "metrics.json";
    auto* evaluate = app.add_subcommand("evaluate", "metrics between prediction and target CSVs");
    evaluate->add_option("--pred", ev_pred)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--target", ev_target)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--mask", ev_mask, "nonzero cells contribute")->check(CLI::ExistingFile);
    evaluate->add_option("--out", ev_out);

    std::string eh_csv, eh_col, eh_out;
    std::size_t eh_dim = 32;
    std::uint64_t eh_seed = 0;
    auto* embed = app.add_subcommand("embed-hash", "hashing embedder for a CSV text column");
    embed->add_option("--csv", eh_csv)->required()->check(CLI::ExistingFile);
    embed->add_option("--text-col", eh_col)->required();
    embed->add_option("--dim", eh_dim)->check(CLI::PositiveNumber);
    embed->add_option("--seed", eh_seed);
    embed->add_option("--out", eh_out, ".tsemb or .csv")->required();

    std::size_t sy_len = 2000;
    std::uint64_t sy_seed = 1;
    std::string sy_csv = "synthetic.csv", sy_emb = "synthetic.tsemb";
    auto* synth = app.add_subcommand("synth", "hidden-driver synthetic dataset");
    synth->add_option("--length", sy_len);
    synth->add_option("--seed", sy_seed);
    synth->add_option("--csv", sy_csv);
    synth->add_option("--emb", sy_emb);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*ctr) {
            const auto ds = load_dataset(ctr_in);
            const auto r = spectral::analyze_ctr(ds, ctr_cfg);
            write_json(ctr_out, harness::to_json(r));
            std::printf("max_lag %zu, %zu of %zu top text frequencies matched\n", r.max_lag, r.matched_count(),
                        r.top_text_frequencies.size());
            for (const auto& m : r.top_text_frequencies)
                std::printf("  f=%.5f (period %.2f) amp=%.4f %s\n", m.peak.frequency, 1.0 / m.peak.frequency,
                            m.peak.amplitude, m.matched ? "matched" : "-");
            std::printf("wrote %s\n", ctr_out.c_str());
        } else if (*tt) {
            const auto ds = load_dataset(tt_in);
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = 0; i < shuffles; ++i) seeds.push_back(tt_seed + i);
            const auto r = transport::shuffle_ratio(ds.series(), ds.embeddings(), seeds, tt_cfg);
            write_json(tt_out, harness::to_json(r));
            std::printf("TT-Wasserstein %.6f; shuffled series %.6f, shuffled text %.6f; ratio %.2f%%\n", r.original,
                        r.ts_shuffled_mean, r.text_shuffled_mean, r.ratio_percent);
            std::printf("wrote %s\n", tt_out.c_str());
        } else if (*train) {
            return run_train(train_flags, false);
        } else if (*impute) {
            return run_train(impute_flags, true);
        } else if (*evaluate) {
            const auto pred = harness::load_csv(ev_pred).series.values();
            const auto target = harness::load_csv(ev_target).series.values();
            std::optional<Matrix> mask;
            if (!ev_mask.empty()) mask = harness::load_csv(ev_mask).series.values();
            const auto r = metrics::evaluate(pred, target, mask);
            write_json(ev_out, metrics::to_json(r));
            std::printf("n=%zu mse=%.6g mae=%.6g rmse=%.6g mape=%.6g mspe=%.6g", r.n, r.mse, r.mae, r.rmse, r.mape,
                        r.mspe);
            if (r.zero_target_count) std::printf(" (%zu zero targets excluded)", r.zero_target_count);
            std::printf("\nwrote %s\n", ev_out.c_str());
        } else if (*embed) {
            const auto table = harness::load_csv(eh_csv, eh_col);
            const auto emb = hash_embeddings(*table.texts, eh_dim, eh_seed);
            if (eh_out.size() >= 4 && eh_out.substr(eh_out.size() - 4) == ".csv")
                embedding::write_embeddings_csv(emb, eh_out);
            else
                embedding::write_embeddings(emb, eh_out);
            std::printf("embedded %zu texts into d=%zu; wrote %s\n", emb.length(), emb.dim(), eh_out.c_str());
        } else if (*synth) {
            const auto ds = harness::make_synthetic_hidden_driver(sy_len, sy_seed);
            harness::write_csv(ds.series(), sy_csv);
            embedding::write_embeddings(ds.embeddings(), sy_emb);
            std::printf("T=%zu N=%zu d=%zu; wrote %s and %s\n", ds.length(), ds.series().variables(),
                        ds.embeddings().dim(), sy_csv.c_str(), sy_emb.c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
