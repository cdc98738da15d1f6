// Copyright 2026 The VLP Toy Planner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Frozen text encoders, the embedding cache in front of them, and the
// trainable adapters that map sentence vectors into model feature space.

#pragma once

#include "vlp/autograd.hpp"
#include "vlp/nn.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vlp
{

/// A frozen sentence encoder. Implementations hold no trainable state and
/// return the same unit-norm D-vector for the same string.
class TextEncoder
{
public:
  virtual ~TextEncoder() = default;
  virtual int dim() const = 0;
  virtual std::string backend_id() const = 0;
  /// Throws ArgumentError on an empty string, BackendError when the backend
  /// cannot produce an embedding.
  virtual Eigen::VectorXd encode(std::string_view text) const = 0;
};

/// Character n-gram (3..5) plus word features, each hashed to a seeded
/// pseudo-random direction and summed. Strings sharing substrings (including
/// digit prefixes of nearby numbers) land close together.
///
/// With numeric_weight > 0 every numeric token additionally contributes
/// value-smooth random Fourier features keyed by its position among the
/// numbers of the string, so nearby values map to nearby vectors.
class HashNgramEncoder final : public TextEncoder
{
public:
  explicit HashNgramEncoder(int dim = 64, std::uint64_t seed = 0x5eed, double numeric_weight = 0.0);
  int dim() const override { return dim_; }
  std::string backend_id() const override;
  Eigen::VectorXd encode(std::string_view text) const override;

private:
  int dim_;
  std::uint64_t seed_;
  double numeric_weight_;
};

/// Whitespace-token unigram + bigram hashing. Numbers are opaque tokens, so
/// nearby values share nothing.
class HashWordEncoder final : public TextEncoder
{
public:
  explicit HashWordEncoder(int dim = 64, std::uint64_t seed = 0x3a7d);
  int dim() const override { return dim_; }
  std::string backend_id() const override;
  Eigen::VectorXd encode(std::string_view text) const override;

private:
  int dim_;
  std::uint64_t seed_;
};

/// Serves embeddings exported offline into an embedding store file (for
/// example by a pretrained language model through the python bindings).
class PrecomputedEncoder final : public TextEncoder
{
public:
  explicit PrecomputedEncoder(const std::string & path);
  int dim() const override { return dim_; }
  std::string backend_id() const override { return backend_; }
  Eigen::VectorXd encode(std::string_view text) const override;
  std::size_t size() const { return table_.size(); }

private:
  std::string backend_;
  int dim_ = 0;
  std::unordered_map<std::uint64_t, Eigen::VectorXd> table_;
};

/// "hash-ngram", "hash-numeric" (hash-ngram with numeric features),
/// "hash-word", or "precomputed:<path>".
std::shared_ptr<const TextEncoder> make_text_encoder(std::string_view spec, int dim = 64);

/// Exact-string memo in front of an encoder. Thread safe; a hit returns the
/// stored vector, which is bitwise identical to a fresh encode.
///
/// On disk: 8-byte magic "VLPEMB01", uint32 header length, JSON header
/// {"backend", "dim", "count"}, then count records of (uint64 FNV-1a hash of
/// the prompt, dim float64 values). Little-endian.
class EmbeddingCache
{
public:
  explicit EmbeddingCache(std::shared_ptr<const TextEncoder> encoder);

  Eigen::VectorXd encode(std::string_view text);
  /// Stacks encodings row-wise (N x D).
  ag::Mat encode_batch(std::span<const std::string> texts);

  int dim() const { return encoder_->dim(); }
  const TextEncoder & encoder() const { return *encoder_; }
  std::size_t hits() const;
  std::size_t misses() const;
  std::size_t size() const;

  void save(const std::string & path) const;
  /// Merges a cache file. Throws BackendError if it was written by a
  /// different backend or dimension.
  void load(const std::string & path);

private:
  std::shared_ptr<const TextEncoder> encoder_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Eigen::VectorXd> entries_;
  std::unordered_map<std::uint64_t, Eigen::VectorXd> loaded_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Writes an embedding store file (same layout as the cache file).
void write_embedding_store(
  const std::string & path, const std::string & backend, int dim,
  const std::vector<std::pair<std::string, Eigen::VectorXd>> & entries);

/// Trainable D -> h -> C adapter (affine, ReLU, affine), h = max(D, C).
struct AdapterMLP
{
  nn::Mlp mlp;

  ag::Var operator()(const ag::Var & x) const { return mlp(x); }
  Eigen::Index input_dim() const { return mlp.first.in_dim(); }
  Eigen::Index hidden_dim() const { return mlp.first.out_dim(); }
  Eigen::Index output_dim() const { return mlp.second.out_dim(); }
  std::size_t parameter_count() const;
};

AdapterMLP make_adapter(
  nn::ParamStore & store, const std::string & name, Eigen::Index text_dim, Eigen::Index feature_dim,
  std::mt19937_64 & rng);

/// Row i = adapter(encode(prompts[i])). Gradients reach the adapter only.
/// Throws ConfigError when the adapter input width differs from the encoder
/// dimension.
ag::Var expectation_features(
  std::span<const std::string> prompts, EmbeddingCache & cache, const AdapterMLP & adapter);
/// Same, from already-encoded sentence vectors (N x D).
ag::Var expectation_features(const ag::Mat & encoded, const AdapterMLP & adapter);

}  // namespace vlp
