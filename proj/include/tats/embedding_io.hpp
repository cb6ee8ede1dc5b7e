#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "tats/core_data.hpp"

namespace tats::embedding {

/// TSEMB1 layout: "TSEMB1" | u32 T | u32 d | T*d f32, all little-endian, row-major.
inline constexpr std::string_view kMagic = "TSEMB1";

data::EmbeddingSequence read_embeddings(const std::filesystem::path& path);
void write_embeddings(const data::EmbeddingSequence& e, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_tsemb(const data::EmbeddingSequence& e);
data::EmbeddingSequence decode_tsemb(const std::vector<std::uint8_t>& bytes);

/// Headerless CSV, one row per timestamp.
data::EmbeddingSequence read_embeddings_csv(const std::filesystem::path& path);
void write_embeddings_csv(const data::EmbeddingSequence& e, const std::filesystem::path& path);

/// Reads TSEMB1 when the magic matches, CSV otherwise.
data::EmbeddingSequence load_embeddings(const std::filesystem::path& path);

enum class Pooling { Avg };

std::vector<double> pool_tokens(const Matrix& token_vectors, Pooling mode = Pooling::Avg);

data::EmbeddingSequence mean_center(const data::EmbeddingSequence& e);

/// Feature-hashing text embedder: whitespace tokens are hashed to a signed
/// coordinate, counts accumulate, and the result is L2-normalized.
std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

/// Seeded 64-bit FNV-1a; the seed bytes are folded in before the token bytes.
std::uint64_t seeded_fnv1a(std::string_view token, std::uint64_t seed);

}  // namespace tats::embedding
