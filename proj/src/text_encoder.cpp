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

#include "vlp/text_encoder.hpp"

#include "vlp/errors.hpp"
#include "vlp/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vlp
{

namespace
{

constexpr char kStoreMagic[8] = {'V', 'L', 'P', 'E', 'M', 'B', '0', '1'};

// Adds the seeded pseudo-random direction of one hashed feature.
void add_feature(Eigen::VectorXd & acc, std::uint64_t feature_hash, double weight)
{
  std::uint64_t state = feature_hash;
  for (Eigen::Index i = 0; i < acc.size(); ++i) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    acc(i) += weight * (2.0 * u - 1.0);
  }
}

Eigen::VectorXd finish(Eigen::VectorXd v, std::string_view backend)
{
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw BackendError(std::string(backend) + ": produced a degenerate embedding");
  }
  return v / n;
}

std::vector<std::string> words(std::string_view text)
{
  std::vector<std::string> out;
  std::stringstream ss{std::string(text)};
  std::string w;
  while (ss >> w) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
    out.push_back(w);
  }
  return out;
}

std::vector<double> numeric_tokens(std::string_view text)
{
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool sign = text[i] == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (sign || std::isdigit(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i + (sign ? 1 : 0);
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) {
        ++j;
      }
      out.push_back(std::strtod(std::string(text.substr(i, j - i)).c_str(), nullptr));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

// Random Fourier features of each number, keyed by its slot in the string.
void add_numeric_features(Eigen::VectorXd & acc, std::string_view text, std::uint64_t seed, double weight)
{
  constexpr int kFrequencies = 8;
  const auto values = numeric_tokens(text);
  for (std::size_t slot = 0; slot < values.size(); ++slot) {
    for (int f = 0; f < kFrequencies; ++f) {
      // Wavelengths from 0.5 to 64 units, geometric.
      const double omega = 2.0 * std::numbers::pi / (0.5 * std::pow(2.0, 7.0 * f / (kFrequencies - 1)));
      std::uint64_t key = fnv1a64("num", seed ^ (slot * 0x10001ULL + static_cast<std::uint64_t>(f) + 1));
      std::uint64_t phase_state = key;
      const double phase = static_cast<double>(splitmix64(phase_state) >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
      add_feature(acc, key ^ 0xc05, weight * std::cos(omega * values[slot] + phase));
      add_feature(acc, key ^ 0x517, weight * std::sin(omega * values[slot] + phase));
    }
  }
}

void require_text(std::string_view text)
{
  if (text.empty()) {
    throw ArgumentError("cannot encode an empty string");
  }
}

struct StoreContents
{
  std::string backend;
  int dim = 0;
  std::vector<std::pair<std::uint64_t, Eigen::VectorXd>> entries;
};

StoreContents read_store(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw BackendError("cannot open embedding store " + path);
  }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kStoreMagic, 8) != 0) {
    throw BackendError(path + " is not an embedding store");
  }
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char *>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  const auto h = nlohmann::json::parse(header);
  StoreContents out;
  out.backend = h.at("backend").get<std::string>();
  out.dim = h.at("dim").get<int>();
  const auto count = h.at("count").get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t key = 0;
    in.read(reinterpret_cast<char *>(&key), sizeof(key));
    Eigen::VectorXd v(out.dim);
    in.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(out.dim * sizeof(double)));
    if (!in) {
      throw BackendError(path + " is truncated");
    }
    out.entries.emplace_back(key, std::move(v));
  }
  return out;
}

void write_store(
  const std::string & path, const std::string & backend, int dim,
  const std::vector<std::pair<std::uint64_t, const Eigen::VectorXd *>> & entries)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw BackendError("cannot write embedding store " + path);
  }
  const std::string header =
    nlohmann::json{{"backend", backend}, {"dim", dim}, {"count", entries.size()}}.dump();
  out.write(kStoreMagic, 8);
  const auto len = static_cast<std::uint32_t>(header.size());
  out.write(reinterpret_cast<const char *>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto & [key, v] : entries) {
    if (v->size() != dim) {
      throw BackendError("embedding width does not match store dimension");
    }
    out.write(reinterpret_cast<const char *>(&key), sizeof(key));
    out.write(reinterpret_cast<const char *>(v->data()), static_cast<std::streamsize>(dim * sizeof(double)));
  }
}

}  // namespace

HashNgramEncoder::HashNgramEncoder(int dim, std::uint64_t seed, double numeric_weight)
: dim_(dim), seed_(seed), numeric_weight_(numeric_weight)
{
  if (dim <= 0) {
    throw ConfigError("encoder dimension must be positive");
  }
}

std::string HashNgramEncoder::backend_id() const
{
  if (numeric_weight_ > 0.0) {
    return "hash-numeric-d" + std::to_string(dim_);
  }
  return "hash-ngram-d" + std::to_string(dim_);
}

Eigen::VectorXd HashNgramEncoder::encode(std::string_view text) const
{
  require_text(text);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  std::string padded = "<";
  for (unsigned char c : text) {
    padded.push_back(static_cast<char>(std::tolower(c)));
  }
  padded.push_back('>');
  const std::string_view view(padded);
  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= view.size(); ++i) {
      add_feature(acc, fnv1a64(view.substr(i, n), seed_ ^ (0x100 + n)), 1.0);
    }
  }
  for (const auto & w : words(text)) {
    add_feature(acc, fnv1a64(w, seed_ ^ 0x77), 2.0);
  }
  if (numeric_weight_ > 0.0) {
    add_numeric_features(acc, text, seed_, numeric_weight_);
  }
  return finish(std::move(acc), "hash-ngram");
}

HashWordEncoder::HashWordEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed)
{
  if (dim <= 0) {
    throw ConfigError("encoder dimension must be positive");
  }
}

std::string HashWordEncoder::backend_id() const { return "hash-word-d" + std::to_string(dim_); }

Eigen::VectorXd HashWordEncoder::encode(std::string_view text) const
{
  require_text(text);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  const auto ws = words(text);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    add_feature(acc, fnv1a64(ws[i], seed_), 1.0);
    if (i + 1 < ws.size()) {
      add_feature(acc, fnv1a64(ws[i] + " " + ws[i + 1], seed_ ^ 0xb1), 0.5);
    }
  }
  return finish(std::move(acc), "hash-word");
}

PrecomputedEncoder::PrecomputedEncoder(const std::string & path)
{
  auto store = read_store(path);
  backend_ = store.backend;
  dim_ = store.dim;
  for (auto & [k, v] : store.entries) {
    table_.emplace(k, std::move(v));
  }
}

Eigen::VectorXd PrecomputedEncoder::encode(std::string_view text) const
{
  require_text(text);
  const auto it = table_.find(fnv1a64(text));
  if (it == table_.end()) {
    throw BackendError(backend_ + ": no precomputed embedding for prompt \"" + std::string(text) + "\"");
  }
  return it->second;
}

std::shared_ptr<const TextEncoder> make_text_encoder(std::string_view spec, int dim)
{
  if (spec == "hash-ngram") {
    return std::make_shared<HashNgramEncoder>(dim);
  }
  if (spec == "hash-numeric") {
    return std::make_shared<HashNgramEncoder>(dim, 0x5eed, 3.0);
  }
  if (spec == "hash-word") {
    return std::make_shared<HashWordEncoder>(dim);
  }
  constexpr std::string_view prefix = "precomputed:";
  if (spec.substr(0, prefix.size()) == prefix) {
    return std::make_shared<PrecomputedEncoder>(std::string(spec.substr(prefix.size())));
  }
  throw BackendError("unknown text encoder backend: " + std::string(spec));
}

EmbeddingCache::EmbeddingCache(std::shared_ptr<const TextEncoder> encoder)
: encoder_(std::move(encoder))
{
  if (!encoder_) {
    throw ArgumentError("embedding cache needs an encoder");
  }
}

Eigen::VectorXd EmbeddingCache::encode(std::string_view text)
{
  std::lock_guard lock(mutex_);
  const std::string key(text);
  if (auto it = entries_.find(key); it != entries_.end()) {
    ++hits_;
    return it->second;
  }
  if (auto it = loaded_.find(fnv1a64(text)); it != loaded_.end()) {
    ++hits_;
    return entries_.emplace(key, it->second).first->second;
  }
  ++misses_;
  return entries_.emplace(key, encoder_->encode(text)).first->second;
}

ag::Mat EmbeddingCache::encode_batch(std::span<const std::string> texts)
{
  ag::Mat out(static_cast<Eigen::Index>(texts.size()), dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = encode(texts[i]).transpose();
  }
  return out;
}

std::size_t EmbeddingCache::hits() const
{
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t EmbeddingCache::misses() const
{
  std::lock_guard lock(mutex_);
  return misses_;
}

std::size_t EmbeddingCache::size() const
{
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void EmbeddingCache::save(const std::string & path) const
{
  std::lock_guard lock(mutex_);
  std::vector<std::pair<std::uint64_t, const Eigen::VectorXd *>> rows;
  std::unordered_map<std::uint64_t, bool> seen;
  for (const auto & [text, v] : entries_) {
    const auto key = fnv1a64(text);
    if (seen.emplace(key, true).second) {
      rows.emplace_back(key, &v);
    }
  }
  for (const auto & [key, v] : loaded_) {
    if (seen.emplace(key, true).second) {
      rows.emplace_back(key, &v);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto & a, const auto & b) { return a.first < b.first; });
  write_store(path, encoder_->backend_id(), encoder_->dim(), rows);
}

void EmbeddingCache::load(const std::string & path)
{
  auto store = read_store(path);
  if (store.backend != encoder_->backend_id() || store.dim != encoder_->dim()) {
    throw BackendError(
      "cache file " + path + " was written by backend '" + store.backend + "' (dim " +
      std::to_string(store.dim) + "), not '" + encoder_->backend_id() + "'");
  }
  std::lock_guard lock(mutex_);
  for (auto & [k, v] : store.entries) {
    loaded_.emplace(k, std::move(v));
  }
}

void write_embedding_store(
  const std::string & path, const std::string & backend, int dim,
  const std::vector<std::pair<std::string, Eigen::VectorXd>> & entries)
{
  std::vector<std::pair<std::uint64_t, const Eigen::VectorXd *>> rows;
  for (const auto & [text, v] : entries) {
    rows.emplace_back(fnv1a64(text), &v);
  }
  write_store(path, backend, dim, rows);
}

std::size_t AdapterMLP::parameter_count() const
{
  return static_cast<std::size_t>(
    mlp.first.weight.value().size() + mlp.first.bias.value().size() +
    mlp.second.weight.value().size() + mlp.second.bias.value().size());
}

AdapterMLP make_adapter(
  nn::ParamStore & store, const std::string & name, Eigen::Index text_dim, Eigen::Index feature_dim,
  std::mt19937_64 & rng)
{
  const Eigen::Index hidden = std::max(text_dim, feature_dim);
  return AdapterMLP{nn::make_mlp(store, name, text_dim, hidden, feature_dim, rng)};
}

ag::Var expectation_features(
  std::span<const std::string> prompts, EmbeddingCache & cache, const AdapterMLP & adapter)
{
  if (prompts.empty()) {
    throw ArgumentError("expectation_features needs at least one prompt");
  }
  if (adapter.input_dim() != cache.dim()) {
    throw ConfigError("adapter input width does not match the text encoder dimension");
  }
  return expectation_features(cache.encode_batch(prompts), adapter);
}

ag::Var expectation_features(const ag::Mat & encoded, const AdapterMLP & adapter)
{
  if (encoded.cols() != adapter.input_dim()) {
    throw ConfigError("adapter input width does not match the text encoder dimension");
  }
  if (encoded.rows() == 0) {
    throw ArgumentError("expectation_features needs at least one prompt");
  }
  return adapter(ag::Var(encoded));
}

}  // namespace vlp
