#include "svl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "svl/error.hpp"

namespace svl {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'V', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kFloat64 = 0;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(err::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Header {
  Shape shape;
  std::size_t payload_offset = 0;
};

Header parse_header(std::span<const std::uint8_t> b) {
  if (b.size() < 10) throw Error(err::kFormat, "SVLT file shorter than its header");
  if (!std::equal(kMagic, kMagic + 4, b.begin())) throw Error(err::kFormat, "bad SVLT magic");
  if (b[4] != kVersion)
    throw Error(err::kFormat, "unsupported SVLT version " + std::to_string(b[4]));
  if (b[5] != kFloat64) throw Error(err::kFormat, "unsupported SVLT dtype " + std::to_string(b[5]));
  const auto ndim = static_cast<std::size_t>(get_le(b, 6, 4));
  if (b.size() < 10 + 4 * ndim) throw Error(err::kFormat, "truncated SVLT dims");
  Header h;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto d = static_cast<std::size_t>(get_le(b, 10 + 4 * i, 4));
    if (d == 0) throw Error(err::kFormat, "SVLT dimension of size zero");
    h.shape.push_back(d);
  }
  h.payload_offset = 10 + 4 * ndim;
  return h;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::uint64_t parse_unsigned(const std::string& field, std::size_t line) {
  const std::string f = trim(field);
  if (f.empty() || !std::all_of(f.begin(), f.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw Error(err::kParse, "line " + std::to_string(line) + ": '" + f +
                                 "' is not an unsigned integer");
  try {
    return std::stoull(f);
  } catch (const std::exception&) {
    throw Error(err::kParse, "line " + std::to_string(line) + ": value out of range");
  }
}

}  // namespace

// ---- SVLT -----------------------------------------------------------------

std::vector<std::uint8_t> encode_svlt(const Tensor& t) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(kFloat64);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + 8 * t.size());
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_svlt(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes);
  const std::size_t n = shape_size(h.shape);
  if (bytes.size() != h.payload_offset + 8 * n)
    throw Error(err::kFormat, "SVLT payload holds " +
                                  std::to_string(bytes.size() - h.payload_offset) +
                                  " bytes, shape " + shape_str(h.shape) + " needs " +
                                  std::to_string(8 * n));
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = std::bit_cast<double>(get_le(bytes, h.payload_offset + 8 * i, 8));
  return Tensor(h.shape, std::move(values));
}

void save_tensor(const fs::path& path, const Tensor& t) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto bytes = encode_svlt(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(err::kIo, "short write to " + path.string());
}

Tensor load_tensor(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_svlt(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

Shape peek_shape(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(err::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> head(10);
  in.read(reinterpret_cast<char*>(head.data()), 10);
  if (in.gcount() != 10) throw Error(err::kFormat, path.string() + ": truncated SVLT header");
  const auto ndim = static_cast<std::size_t>(get_le(head, 6, 4));
  head.resize(10 + 4 * ndim);
  in.read(reinterpret_cast<char*>(head.data() + 10), static_cast<std::streamsize>(4 * ndim));
  if (static_cast<std::size_t>(in.gcount()) != 4 * ndim)
    throw Error(err::kFormat, path.string() + ": truncated SVLT dims");
  return parse_header(head).shape;
}

// ---- events ---------------------------------------------------------------

EventStream parse_events(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,x,y,p")
    throw Error(err::kParse, "event file must start with the header 't,x,y,p'");
  EventStream stream;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 4)
      throw Error(err::kParse, "line " + std::to_string(lineno) + ": expected 4 fields, got " +
                                   std::to_string(fields.size()));
    Event e;
    e.t = parse_unsigned(fields[0], lineno);
    const auto x = parse_unsigned(fields[1], lineno);
    const auto y = parse_unsigned(fields[2], lineno);
    const auto p = parse_unsigned(fields[3], lineno);
    if (x > UINT32_MAX || y > UINT32_MAX)
      throw Error(err::kParse, "line " + std::to_string(lineno) + ": pixel coordinate too large");
    if (p > 1)
      throw Error(err::kParse, "line " + std::to_string(lineno) + ": polarity must be 0 or 1, got " +
                                   std::to_string(p));
    e.x = static_cast<std::uint32_t>(x);
    e.y = static_cast<std::uint32_t>(y);
    e.p = static_cast<std::uint8_t>(p);
    stream.events.push_back(e);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

EventStream read_events(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_events(std::string(bytes.begin(), bytes.end()));
}

void write_events(const fs::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + path.string());
  out << "t,x,y,p\n";
  for (const Event& e : stream.events)
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
}

// ---- manifest -------------------------------------------------------------

std::vector<TripletRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(err::kIo, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<TripletRecord> records;
  std::optional<std::size_t> width;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(err::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    TripletRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.points_file = resolve(j.at("points_file").get<std::string>());
      r.image_emb_file = resolve(j.at("image_emb_file").get<std::string>());
      r.text_emb_file = resolve(j.at("text_emb_file").get<std::string>());
      if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(err::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (const fs::path* f : {&r.points_file, &r.image_emb_file, &r.text_emb_file})
      if (!fs::exists(*f))
        throw Error(err::kIo, "record " + r.id + ": missing file " + f->string());
    for (const fs::path* f : {&r.image_emb_file, &r.text_emb_file}) {
      const Shape s = peek_shape(*f);
      const std::size_t w = s.empty() ? 1 : s.back();
      if (!width) width = w;
      if (*width != w)
        throw Error(err::kDim, "record " + r.id + ": embedding width " + std::to_string(w) +
                                   " differs from " + std::to_string(*width));
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& path, const std::vector<TripletRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + path.string());
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  for (const TripletRecord& r : records) {
    nlohmann::json j{{"id", r.id},
                     {"points_file", rel(r.points_file)},
                     {"image_emb_file", rel(r.image_emb_file)},
                     {"text_emb_file", rel(r.text_emb_file)}};
    if (r.label) j["label"] = *r.label;
    out << j.dump() << '\n';
  }
}

// ---- embedding providers --------------------------------------------------

EmbeddingProvider EmbeddingProvider::file(std::size_t dim) { return {Mode::file, dim, 0}; }

EmbeddingProvider EmbeddingProvider::mock(std::size_t dim, std::uint64_t seed) {
  return {Mode::mock, dim, seed};
}

std::vector<double> EmbeddingProvider::embed(const std::string& key) const {
  if (mode_ == Mode::file) {
    const Tensor t = load_tensor(key);
    if (t.size() != dim_)
      throw Error(err::kDim, key + ": embedding width " + std::to_string(t.size()) +
                                 ", expected " + std::to_string(dim_));
    return t.values();
  }
  // FNV-1a over the key, mixed with the seed.
  std::uint64_t h = 1469598103934665603ULL ^ (seed_ * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::mt19937_64 rng(h);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(dim_);
  double ss = 0.0;
  for (double& x : v) {
    x = dist(rng);
    ss += x * x;
  }
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
  return v;
}

// ---- datasets -------------------------------------------------------------

namespace {

PointCloud cloud_from_tensor(const Tensor& t, const std::string& id) {
  if (t.rank() != 2 || t.dim(1) < 3)
    throw Error(err::kShape, "record " + id + ": points must be N x (3 + F), got " +
                                 shape_str(t.shape()));
  const std::size_t n = t.dim(0), w = t.dim(1), f = w - 3;
  std::vector<Point3> pts(n);
  std::vector<double> feats;
  feats.reserve(n * f);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {t[i * w], t[i * w + 1], t[i * w + 2]};
    for (std::size_t j = 3; j < w; ++j) feats.push_back(t[i * w + j]);
  }
  return PointCloud(std::move(pts), std::move(feats), f);
}

Tensor cloud_to_tensor(const PointCloud& c) {
  const std::size_t w = 3 + c.feature_dim();
  std::vector<double> v;
  v.reserve(c.size() * w);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (double x : c.point(i)) v.push_back(x);
    for (std::size_t j = 0; j < c.feature_dim(); ++j) v.push_back(c.features()[i * c.feature_dim() + j]);
  }
  return Tensor({c.size(), w}, std::move(v));
}

}  // namespace

Dataset load_dataset(const fs::path& manifest) {
  const auto records = load_manifest(manifest);
  Dataset ds;
  if (records.empty()) return ds;
  ds.dim = peek_shape(records[0].text_emb_file).back();
  const EmbeddingProvider provider = EmbeddingProvider::file(ds.dim);
  for (const TripletRecord& r : records) {
    ds.samples.push_back(Sample{r.id, cloud_from_tensor(load_tensor(r.points_file), r.id),
                                provider.embed(r.text_emb_file.string()),
                                provider.embed(r.image_emb_file.string()), r.label});
  }
  return ds;
}

// ---- synthetic triplets ---------------------------------------------------

namespace {

using Rng = std::mt19937_64;

const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> names{"sphere", "cube",     "two_cluster", "helix",
                                              "plane",  "torus",    "cylinder",    "cone"};
  return names;
}

constexpr std::size_t kVariants = 3;

Point3 sample_primitive(std::size_t kind, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  constexpr double kPi = std::numbers::pi;
  switch (kind) {
    case 0: {  // sphere surface
      Point3 p{n01(rng), n01(rng), n01(rng)};
      const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) + 1e-12;
      return {0.8 * p[0] / r, 0.8 * p[1] / r, 0.8 * p[2] / r};
    }
    case 1: {  // cube surface
      const auto face = static_cast<int>(u01(rng) * 6.0) % 6;
      Point3 p{0.6 * u(rng), 0.6 * u(rng), 0.6 * u(rng)};
      p[static_cast<std::size_t>(face / 2)] = face % 2 ? 0.6 : -0.6;
      return p;
    }
    case 2: {  // two blobs
      const double side = u01(rng) < 0.5 ? -0.5 : 0.5;
      return {side + 0.12 * n01(rng), 0.12 * n01(rng), 0.12 * n01(rng)};
    }
    case 3: {  // helix
      const double t = u01(rng) * 4.0 * kPi;
      return {0.5 * std::cos(t), 0.5 * std::sin(t), t / (4.0 * kPi) * 1.6 - 0.8};
    }
    case 4:  // flat patch
      return {0.8 * u(rng), 0.8 * u(rng), 0.0};
    case 5: {  // torus
      const double a = u01(rng) * 2.0 * kPi, b = u01(rng) * 2.0 * kPi;
      return {(0.6 + 0.2 * std::cos(b)) * std::cos(a), (0.6 + 0.2 * std::cos(b)) * std::sin(a),
              0.2 * std::sin(b)};
    }
    case 6: {  // cylinder side
      const double a = u01(rng) * 2.0 * kPi;
      return {0.5 * std::cos(a), 0.5 * std::sin(a), 0.7 * u(rng)};
    }
    default: {  // cone side, apex up
      const double a = u01(rng) * 2.0 * kPi, h = u01(rng);
      return {0.6 * (1.0 - h) * std::cos(a), 0.6 * (1.0 - h) * std::sin(a), 1.4 * h - 0.7};
    }
  }
}

// Variant v squeezes y and tilts about x so rotated copies of symmetric
// primitives remain distinguishable.
Point3 apply_variant(const Point3& p, std::size_t variant) {
  if (variant == 0) return p;
  const double squeeze = 1.0 / (1.0 + 0.5 * static_cast<double>(variant));
  const double ang = static_cast<double>(variant) * std::numbers::pi / 4.0;
  const double y = p[1] * squeeze, z = p[2];
  return {p[0], std::cos(ang) * y - std::sin(ang) * z, std::sin(ang) * y + std::cos(ang) * z};
}

std::vector<double> unit(std::vector<double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

std::size_t synth_class_capacity() { return primitive_names().size() * kVariants; }

SynthDataset synth_triplets(const SynthConfig& cfg) {
  if (cfg.n_classes < 1 || cfg.n_per_class < 1 || cfg.points < 1)
    throw Error(err::kConfig, "synth needs at least one class, sample and point");
  if (cfg.n_classes > cfg.dim)
    throw Error(err::kConfig, "synth needs n_classes <= embedding width for orthonormal prompts");
  if (cfg.n_classes > synth_class_capacity())
    throw Error(err::kConfig, "synth supports at most " + std::to_string(synth_class_capacity()) +
                                  " classes");
  Rng rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::size_t C = cfg.dim, K = cfg.n_classes;

  // Gram-Schmidt on Gaussian rows gives orthonormal class prompts.
  std::vector<std::vector<double>> prompts;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> v(C);
    for (double& x : v) x = n01(rng);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : prompts) {
        double d = 0.0;
        for (std::size_t i = 0; i < C; ++i) d += v[i] * q[i];
        for (std::size_t i = 0; i < C; ++i) v[i] -= d * q[i];
      }
    prompts.push_back(unit(std::move(v)));
  }

  SynthDataset out{{}, Tensor::zeros({K, C}), {}, {}};
  std::vector<double> flat;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t prim = k % primitive_names().size();
    const std::size_t variant = k / primitive_names().size();
    out.classes.push_back(primitive_names()[prim] +
                          (variant ? "_v" + std::to_string(variant) : std::string()));
    flat.insert(flat.end(), prompts[k].begin(), prompts[k].end());
  }
  out.prompts = Tensor({K, C}, std::move(flat));
  out.train.dim = out.test.dim = C;

  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * cfg.n_per_class));
  const double sigma = cfg.image_noise / std::sqrt(static_cast<double>(C));
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t prim = k % primitive_names().size();
    const std::size_t variant = k / primitive_names().size();
    for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
      std::uniform_real_distribution<double> scale_dist(0.9, 1.1);
      const double s = scale_dist(rng);
      std::vector<Point3> pts(cfg.points);
      for (Point3& p : pts) {
        p = apply_variant(sample_primitive(prim, rng), variant);
        for (double& c : p) c = s * c + cfg.point_jitter * n01(rng);
      }
      std::vector<double> image = prompts[k];
      for (double& x : image) x += sigma * n01(rng);
      Sample sample{"c" + std::to_string(k) + "_" + std::to_string(i), PointCloud(std::move(pts)),
                    prompts[k], unit(std::move(image)), out.classes[k]};
      (i < n_train ? out.train : out.test).samples.push_back(std::move(sample));
    }
  }
  return out;
}

void write_synth(const SynthDataset& data, const fs::path& dir) {
  fs::create_directories(dir / "points");
  fs::create_directories(dir / "image");
  fs::create_directories(dir / "text");
  const std::size_t C = data.prompts.dim(1);
  for (std::size_t k = 0; k < data.classes.size(); ++k) {
    std::vector<double> row(data.prompts.data().begin() + static_cast<std::ptrdiff_t>(k * C),
                            data.prompts.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * C));
    save_tensor(dir / "text" / (data.classes[k] + ".svlt"), Tensor({C}, std::move(row)));
  }
  auto emit = [&](const Dataset& ds) {
    std::vector<TripletRecord> recs;
    for (const Sample& s : ds.samples) {
      TripletRecord r{s.id, dir / "points" / (s.id + ".svlt"), dir / "image" / (s.id + ".svlt"),
                      dir / "text" / (*s.label + ".svlt"), s.label};
      save_tensor(r.points_file, cloud_to_tensor(s.cloud));
      save_tensor(r.image_emb_file, Tensor({C}, s.image));
      recs.push_back(std::move(r));
    }
    return recs;
  };
  auto train = emit(data.train);
  auto test = emit(data.test);
  write_manifest(dir / "train.jsonl", train);
  write_manifest(dir / "test.jsonl", test);
  train.insert(train.end(), test.begin(), test.end());
  write_manifest(dir / "manifest.jsonl", train);
  save_tensor(dir / "prompts.svlt", data.prompts);
  std::ofstream labels(dir / "labels.json", std::ios::trunc);
  labels << nlohmann::json(data.classes).dump(2) << '\n';
}

}  // namespace svl
