#include "tats/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace tats::embedding {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_tsemb(const data::EmbeddingSequence& e) {
    const Matrix& m = e.vectors();
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.reserve(out.size() + 4 * m.size());
    for (double v : m.data()) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) fail(ErrorCode::NonFinite, "embedding value overflows f32");
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

data::EmbeddingSequence decode_tsemb(const std::vector<std::uint8_t>& bytes) {
    const std::size_t header = kMagic.size() + 8;
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
        fail(ErrorCode::BadMagic, "expected TSEMB1 header");
    if (bytes.size() < header) fail(ErrorCode::TruncatedPayload, "header cut short");
    const std::uint32_t rows = get_u32(bytes.data() + kMagic.size());
    const std::uint32_t cols = get_u32(bytes.data() + kMagic.size() + 4);
    const std::uint64_t payload = 4ULL * rows * cols;
    if (bytes.size() - header < payload)
        fail(ErrorCode::TruncatedPayload, "payload holds " + std::to_string(bytes.size() - header) +
                                              " bytes, header claims " + std::to_string(payload));
    Matrix m(rows, cols);
    const std::uint8_t* p = bytes.data() + header;
    for (std::size_t i = 0; i < m.size(); ++i, p += 4) {
        const float f = std::bit_cast<float>(get_u32(p));
        if (!std::isfinite(f)) fail(ErrorCode::NonFinite, "non-finite value at flat index " + std::to_string(i));
        m.data()[i] = f;
    }
    return data::EmbeddingSequence(std::move(m));
}

data::EmbeddingSequence read_embeddings(const std::filesystem::path& path) { return decode_tsemb(slurp(path)); }

void write_embeddings(const data::EmbeddingSequence& e, const std::filesystem::path& path) {
    const auto bytes = encode_tsemb(e);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

data::EmbeddingSequence read_embeddings_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0) fail(ErrorCode::ParseError, "row " + std::to_string(rows + 1) + ", column " +
                                                           std::to_string(c + 1) + ": '" + cell + "'");
            values.push_back(v);
            ++c;
        }
        if (rows == 0) cols = c;
        else if (c != cols) fail(ErrorCode::ParseError, "row " + std::to_string(rows + 1) + " has " +
                                                            std::to_string(c) + " columns, expected " +
                                                            std::to_string(cols));
        ++rows;
    }
    return data::EmbeddingSequence(Matrix(rows, cols, std::move(values)));
}

void write_embeddings_csv(const data::EmbeddingSequence& e, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.precision(17);
    const Matrix& m = e.vectors();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

data::EmbeddingSequence load_embeddings(const std::filesystem::path& path) {
    auto bytes = slurp(path);
    if (bytes.size() >= kMagic.size() && std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) == 0)
        return decode_tsemb(bytes);
    return read_embeddings_csv(path);
}

std::vector<double> pool_tokens(const Matrix& token_vectors, Pooling mode) {
    if (token_vectors.rows() == 0) fail(ErrorCode::EmptyText, "no token vectors to pool");
    std::vector<double> out(token_vectors.cols(), 0.0);
    switch (mode) {
        case Pooling::Avg:
            for (std::size_t r = 0; r < token_vectors.rows(); ++r)
                for (std::size_t c = 0; c < token_vectors.cols(); ++c) out[c] += token_vectors(r, c);
            for (double& v : out) v /= static_cast<double>(token_vectors.rows());
            break;
    }
    return out;
}

data::EmbeddingSequence mean_center(const data::EmbeddingSequence& e) {
    const Matrix& m = e.vectors();
    require(m.rows() >= 1, ErrorCode::InvalidArgument, "mean_center needs at least one row");
    std::vector<double> mean(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
    for (double& v : mean) v /= static_cast<double>(m.rows());
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) - mean[c];
    return data::EmbeddingSequence(std::move(out));
}

std::uint64_t seeded_fnv1a(std::string_view token, std::uint64_t seed) {
    constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    constexpr std::uint64_t kPrime = 0x100000001b3ULL;
    std::uint64_t h = kOffset;
    for (int i = 0; i < 8; ++i) {
        h ^= (seed >> (8 * i)) & 0xffU;
        h *= kPrime;
    }
    for (unsigned char ch : token) {
        h ^= ch;
        h *= kPrime;
    }
    return h;
}

std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    require(dim >= 1, ErrorCode::InvalidArgument, "hash_embed dimension must be >= 1");
    std::vector<double> v(dim, 0.0);
    std::size_t i = 0;
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i == start) break;
        const std::uint64_t h = seeded_fnv1a(text.substr(start, i - start), seed);
        v[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

}  // namespace tats::embedding
