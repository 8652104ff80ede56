#pragma once

// Tensor, event and manifest I/O, embedding providers and the synthetic
// triplet generator.
//
// SVLT tensor file, little-endian:
//   "SVLT" | u8 version = 1 | u8 dtype (0 = float64) | u32 ndim |
//   ndim x u32 dims | row-major payload

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svl/autodiff.hpp"
#include "svl/geometry.hpp"

namespace svl {

namespace fs = std::filesystem;

std::vector<std::uint8_t> encode_svlt(const Tensor& t);
// Throws format_error on bad magic, unsupported version/dtype or truncation.
Tensor decode_svlt(std::span<const std::uint8_t> bytes);

void save_tensor(const fs::path& path, const Tensor& t);
Tensor load_tensor(const fs::path& path);
// Reads only the header; cheap width checks on large files.
Shape peek_shape(const fs::path& path);

// CSV with header "t,x,y,p". Rows are sorted by t on load (stable).
EventStream read_events(const fs::path& path);
EventStream parse_events(const std::string& text);
void write_events(const fs::path& path, const EventStream& stream);

struct TripletRecord {
  std::string id;
  fs::path points_file;
  fs::path image_emb_file;
  fs::path text_emb_file;
  std::optional<std::string> label;
};

// JSON lines. Relative paths resolve against the manifest's directory.
// Throws io_error naming the record for a missing file and dim_mismatch when
// embedding widths differ across the set.
std::vector<TripletRecord> load_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const std::vector<TripletRecord>& records);

class EmbeddingProvider {
 public:
  enum class Mode { file, mock };

  static EmbeddingProvider file(std::size_t dim);
  static EmbeddingProvider mock(std::size_t dim, std::uint64_t seed);

  Mode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }

  // File mode: key is an SVLT path. Mock mode: key is any input id and the
  // result is a unit vector that depends only on (seed, key).
  std::vector<double> embed(const std::string& key) const;

 private:
  EmbeddingProvider(Mode mode, std::size_t dim, std::uint64_t seed)
      : mode_(mode), dim_(dim), seed_(seed) {}
  Mode mode_;
  std::size_t dim_;
  std::uint64_t seed_;
};

struct Sample {
  std::string id;
  PointCloud cloud;
  std::vector<double> text;
  std::vector<double> image;
  std::optional<std::string> label;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t dim = 0;
};

Dataset load_dataset(const fs::path& manifest);

struct SynthConfig {
  std::size_t n_classes = 3;
  std::size_t n_per_class = 64;
  std::size_t dim = 512;
  std::size_t points = 256;
  std::uint64_t seed = 7;
  double image_noise = 0.1;   // norm of the image-embedding perturbation
  double point_jitter = 0.02;  // per-coordinate Gaussian jitter
  double train_fraction = 0.75;
};

struct SynthDataset {
  std::vector<std::string> classes;
  Tensor prompts;  // K x C class text embeddings, orthonormal rows
  Dataset train;
  Dataset test;
};

// Number of distinct classes the generator can produce.
std::size_t synth_class_capacity();

SynthDataset synth_triplets(const SynthConfig& cfg);

// Writes points/, image/, text/ SVLT files, train.jsonl, test.jsonl,
// manifest.jsonl (all records), prompts.svlt and labels.json.
void write_synth(const SynthDataset& data, const fs::path& dir);

}  // namespace svl
