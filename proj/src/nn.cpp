#include "tats/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace tats::nn {

Dense::Dense(std::size_t in, std::size_t out)
    : weight_(out, in), bias_(out, 0.0), weight_grad_(out, in), bias_grad_(out, 0.0) {
    require(in >= 1 && out >= 1, ErrorCode::InvalidArgument, "dense layer needs in, out >= 1");
}

void Dense::init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    for (double& w : weight_.data()) w = rng.uniform(-bound, bound);
    for (double& b : bias_) b = rng.uniform(-bound, bound);
}

Matrix Dense::forward(const Matrix& x) {
    if (x.cols() != in_features())
        fail(ErrorCode::ShapeMismatch, "dense input width " + std::to_string(x.cols()) + ", expected " +
                                           std::to_string(in_features()));
    input_ = x;
    const std::size_t out = out_features();
    Matrix y(x.rows(), out);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto xr = x.row(r);
        for (std::size_t o = 0; o < out; ++o) {
            const auto wr = weight_.row(o);
            double acc = bias_[o];
            for (std::size_t i = 0; i < xr.size(); ++i) acc += xr[i] * wr[i];
            y(r, o) = acc;
        }
    }
    return y;
}

Matrix Dense::backward(const Matrix& upstream) {
    if (upstream.rows() != input_.rows() || upstream.cols() != out_features())
        fail(ErrorCode::ShapeMismatch, "dense upstream gradient shape");
    const std::size_t in = in_features();
    Matrix dx(input_.rows(), in);
    for (std::size_t r = 0; r < upstream.rows(); ++r) {
        const auto xr = input_.row(r);
        auto dxr = dx.row(r);
        for (std::size_t o = 0; o < out_features(); ++o) {
            const double g = upstream(r, o);
            if (g == 0.0) continue;
            bias_grad_[o] += g;
            auto gw = weight_grad_.row(o);
            const auto wr = weight_.row(o);
            for (std::size_t i = 0; i < in; ++i) {
                gw[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
    }
    return dx;
}

void Dense::collect(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", weight_.data(), weight_grad_.data()});
    out.push_back({prefix + ".bias", bias_, bias_grad_});
}

Mlp::Mlp(std::vector<std::size_t> widths, double dropout) : dropout_(dropout) {
    require(widths.size() >= 2, ErrorCode::InvalidArgument, "mlp needs at least input and output widths");
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1]);
}

void Mlp::init_uniform(Rng& rng) {
    for (auto& layer : layers_) layer.init_uniform(rng);
}

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.parameter_count();
    return n;
}

Matrix Mlp::forward(const Matrix& x, Mode mode, Rng* dropout_rng) {
    const bool drop = mode == Mode::Train && dropout_ > 0.0;
    require(!drop || dropout_rng != nullptr, ErrorCode::InvalidArgument, "training-mode dropout needs an rng");
    pre_activation_.assign(layers_.size() - 1, Matrix{});
    keep_scale_.assign(layers_.size() - 1, Matrix{});
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].forward(h);
        if (l + 1 == layers_.size()) break;
        pre_activation_[l] = h;
        for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
        if (drop) {
            Matrix keep(h.rows(), h.cols());
            const double scale = 1.0 / (1.0 - dropout_);
            for (std::size_t i = 0; i < h.size(); ++i) {
                keep.data()[i] = dropout_rng->bernoulli(dropout_) ? 0.0 : scale;
                h.data()[i] *= keep.data()[i];
            }
            keep_scale_[l] = std::move(keep);
        }
    }
    return h;
}

Matrix Mlp::backward(const Matrix& upstream) {
    Matrix g = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size()) {
            const Matrix& pre = pre_activation_[l];
            const Matrix& keep = keep_scale_[l];
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!keep.empty()) g.data()[i] *= keep.data()[i];
                if (pre.data()[i] <= 0.0) g.data()[i] = 0.0;
            }
        }
        g = layers_[l].backward(g);
    }
    return g;
}

void Mlp::collect(std::vector<ParamView>& out, const std::string& prefix) {
    for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].collect(out, prefix + ".layer" + std::to_string(l));
}

LossResult mse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_loss");
    require(!pred.empty(), ErrorCode::EmptySelection, "mse_loss on empty matrices");
    LossResult r{0.0, Matrix(pred.rows(), pred.cols())};
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred.data()[i] - target.data()[i];
        r.loss += diff * diff;
        r.grad.data()[i] = 2.0 * diff / n;
    }
    r.loss /= n;
    return r;
}

LossResult masked_mse_loss(const Matrix& pred, const Matrix& target, const Matrix& weight) {
    require_same_shape(pred, target, "masked_mse_loss");
    require_same_shape(pred, weight, "masked_mse_loss weight");
    LossResult r{0.0, Matrix(pred.rows(), pred.cols())};
    double count = 0.0;
    for (double w : weight.data()) count += w;
    if (count == 0.0) return r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (weight.data()[i] == 0.0) continue;
        const double diff = pred.data()[i] - target.data()[i];
        r.loss += diff * diff;
        r.grad.data()[i] = 2.0 * diff / count;
    }
    r.loss /= count;
    return r;
}

Adam::Adam(std::vector<ParamView> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p.value.size(), 0.0);
        v_.emplace_back(p.value.size(), 0.0);
    }
}

void Adam::step() {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k].value;
        auto grad = params_[k].grad;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void Adam::scale_grad(double factor) {
    for (auto& p : params_)
        for (double& g : p.grad) g *= factor;
}

std::pair<Matrix, InstanceNormState> instance_normalize(const Matrix& x, double eps) {
    require(x.rows() >= 2, ErrorCode::TooShort, "instance normalization needs at least 2 rows");
    Matrix ones(x.rows(), x.cols(), 1.0);
    return instance_normalize_masked(x, ones, eps);
}

std::pair<Matrix, InstanceNormState> instance_normalize_masked(const Matrix& x, const Matrix& mask, double eps) {
    require_same_shape(x, mask, "instance_normalize mask");
    InstanceNormState st{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
    Matrix out(x.rows(), x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double count = 0.0, sum = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            count += mask(r, c);
            sum += mask(r, c) * x(r, c);
        }
        if (count == 0.0) fail(ErrorCode::AllMasked, "variable " + std::to_string(c) + " has no observed entry");
        const double mean = sum / count;
        double var = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double d = x(r, c) - mean;
            var += mask(r, c) * d * d;
        }
        const double sd = std::max(std::sqrt(var / count), eps);
        st.mean[c] = mean;
        st.stdev[c] = sd;
        for (std::size_t r = 0; r < x.rows(); ++r)
            out(r, c) = mask(r, c) != 0.0 ? (x(r, c) - mean) / sd : 0.0;
    }
    return {std::move(out), std::move(st)};
}

Matrix instance_denormalize(const Matrix& y, const InstanceNormState& state) {
    require(y.cols() == state.mean.size(), ErrorCode::ShapeMismatch, "denormalize width vs stored statistics");
    Matrix out(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) out(r, c) = y(r, c) * state.stdev[c] + state.mean[c];
    return out;
}

std::vector<std::vector<double>> snapshot(const std::vector<ParamView>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.value.begin(), p.value.end());
    return out;
}

void restore(const std::vector<ParamView>& params, const std::vector<std::vector<double>>& values) {
    require(params.size() == values.size(), ErrorCode::ShapeMismatch, "restore tensor count");
    for (std::size_t k = 0; k < params.size(); ++k) {
        require(params[k].value.size() == values[k].size(), ErrorCode::ShapeMismatch, "restore tensor size");
        std::copy(values[k].begin(), values[k].end(), params[k].value.begin());
    }
}

std::size_t count_parameters(const std::vector<ParamView>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'A', 'T', 'S', 'C', 'K', 'P', 'T'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& meta, const std::vector<ParamView>& params) {
    nlohmann::json header;
    header["meta"] = meta;
    header["tensors"] = nlohmann::json::array();
    for (const auto& p : params) header["tensors"].push_back({{"name", p.name}, {"size", p.value.size()}});
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& p : params)
        for (double v : p.value) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<ParamView>& params) {
    const auto bytes = encode_checkpoint(meta, params);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        fail(ErrorCode::BadMagic, "not a TATSCKPT checkpoint");
    const std::uint64_t header_len = get_u64(bytes.data() + 8);
    if (bytes.size() < 16 + header_len) fail(ErrorCode::TruncatedPayload, "checkpoint header cut short");
    const auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    Checkpoint ck;
    ck.meta = header.at("meta");
    std::size_t offset = 16 + header_len;
    for (const auto& t : header.at("tensors")) {
        const std::size_t n = t.at("size").get<std::size_t>();
        if (bytes.size() < offset + 8 * n) fail(ErrorCode::TruncatedPayload, "checkpoint payload cut short");
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i, offset += 8) values[i] = std::bit_cast<double>(get_u64(bytes.data() + offset));
        ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(values));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

void apply_checkpoint(const Checkpoint& ck, const std::vector<ParamView>& params) {
    require(ck.tensors.size() == params.size(), ErrorCode::ShapeMismatch,
            "checkpoint holds " + std::to_string(ck.tensors.size()) + " tensors, model has " +
                std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& [name, values] = ck.tensors[k];
        require(name == params[k].name && values.size() == params[k].value.size(), ErrorCode::ShapeMismatch,
                "checkpoint tensor " + name + " does not match " + params[k].name);
        std::copy(values.begin(), values.end(), params[k].value.begin());
    }
}

}  // namespace tats::nn
