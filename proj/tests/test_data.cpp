#include <doctest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "svl/data.hpp"
#include "svl/error.hpp"

using namespace svl;
using svl::testing::random_tensor;
using svl::testing::temp_dir;

namespace {

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() + ": " + e.what();
  }
  return "";
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("svlt round trip is bitwise") {
  std::mt19937_64 rng(1);
  const Tensor t = random_tensor({3, 4}, rng, -1e6, 1e6);
  const Tensor back = decode_svlt(encode_svlt(t));
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(t[i]));

  const Tensor odd({2}, {-0.0, 5e-324});
  const Tensor odd_back = decode_svlt(encode_svlt(odd));
  CHECK(std::signbit(odd_back[0]));
  CHECK(odd_back[1] == 5e-324);

  const Tensor s = Tensor::scalar(3.25);
  const Tensor s_back = decode_svlt(encode_svlt(s));
  CHECK(s_back.rank() == 0);
  CHECK(s_back.item() == 3.25);

  const auto dir = temp_dir("svlt");
  save_tensor(dir / "a.svlt", t);
  CHECK(load_tensor(dir / "a.svlt").values() == t.values());
  CHECK(peek_shape(dir / "a.svlt") == Shape{3, 4});
}

TEST_CASE("svlt header layout and errors") {
  const auto bytes = encode_svlt(Tensor({2}, {1.0, 2.0}));
  REQUIRE(bytes.size() == 4 + 1 + 1 + 4 + 4 + 16);
  CHECK(bytes[0] == 0x53);
  CHECK(bytes[1] == 0x56);
  CHECK(bytes[2] == 0x4C);
  CHECK(bytes[3] == 0x54);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);
  CHECK(bytes[10] == 2);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { decode_svlt(bad); }).starts_with("format_error"));
  auto version = bytes;
  version[4] = 2;
  CHECK(kind_of([&] { decode_svlt(version); }).starts_with("format_error"));
  auto dtype = bytes;
  dtype[5] = 1;
  CHECK(kind_of([&] { decode_svlt(dtype); }).starts_with("format_error"));
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  CHECK(kind_of([&] { decode_svlt(truncated); }).starts_with("format_error"));
  CHECK(kind_of([&] { load_tensor("/nonexistent/x.svlt"); }) != "");
}

TEST_CASE("event csv") {
  const EventStream s = parse_events("t,x,y,p\n30,1,2,1\n10,3,4,0\n20,5,6,1\n");
  REQUIRE(s.events.size() == 3);
  CHECK(s.events[0].t == 10);
  CHECK(s.events[1].t == 20);
  CHECK(s.events[2].t == 30);
  CHECK(s.events[0].x == 3);
  CHECK(s.events[2].p == 1);

  CHECK(kind_of([] { parse_events("t,x,y,p\n1,2,3,2\n"); }).starts_with("parse_error"));
  CHECK(kind_of([] { parse_events("t,x,y,p\n1,2,3\n"); }).starts_with("parse_error"));
  CHECK(kind_of([] { parse_events("t,x,y,p\n1,-2,3,0\n"); }).starts_with("parse_error"));
  CHECK(kind_of([] { parse_events("a,b,c,d\n1,2,3,0\n"); }).starts_with("parse_error"));

  const auto dir = temp_dir("events");
  write_events(dir / "e.csv", s);
  const EventStream back = read_events(dir / "e.csv");
  REQUIRE(back.events.size() == 3);
  CHECK(back.events[1].y == s.events[1].y);
}

TEST_CASE("manifest") {
  const auto dir = temp_dir("manifest");
  fs::create_directories(dir / "e");
  save_tensor(dir / "p0.svlt", Tensor::zeros({4, 3}));
  save_tensor(dir / "e/t512.svlt", Tensor::full({512}, 1.0));
  save_tensor(dir / "e/i512.svlt", Tensor::full({512}, 1.0));
  save_tensor(dir / "e/t256.svlt", Tensor::full({256}, 1.0));
  write_text(dir / "ok.jsonl",
             R"({"id":"a","points_file":"p0.svlt","image_emb_file":"e/i512.svlt","text_emb_file":"e/t512.svlt","label":"cup"})"
             "\n"
             R"({"id":"b","points_file":"p0.svlt","image_emb_file":"e/i512.svlt","text_emb_file":"e/t512.svlt"})"
             "\n");
  const auto recs = load_manifest(dir / "ok.jsonl");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].label.value() == "cup");
  CHECK_FALSE(recs[1].label.has_value());
  CHECK(recs[0].points_file == dir / "p0.svlt");

  write_text(dir / "missing.jsonl",
             R"({"id":"ghost","points_file":"nope.svlt","image_emb_file":"e/i512.svlt","text_emb_file":"e/t512.svlt"})"
             "\n");
  const std::string m = kind_of([&] { load_manifest(dir / "missing.jsonl"); });
  CHECK(m.starts_with("io_error"));
  CHECK(m.find("ghost") != std::string::npos);

  write_text(dir / "mixed.jsonl",
             R"({"id":"a","points_file":"p0.svlt","image_emb_file":"e/i512.svlt","text_emb_file":"e/t512.svlt"})"
             "\n"
             R"({"id":"b","points_file":"p0.svlt","image_emb_file":"e/i512.svlt","text_emb_file":"e/t256.svlt"})"
             "\n");
  CHECK(kind_of([&] { load_manifest(dir / "mixed.jsonl"); }).starts_with("dim_mismatch"));

  write_manifest(dir / "rt.jsonl", recs);
  const auto rt = load_manifest(dir / "rt.jsonl");
  REQUIRE(rt.size() == 2);
  CHECK(rt[1].id == "b");
  CHECK(fs::equivalent(rt[0].text_emb_file, recs[0].text_emb_file));
}

TEST_CASE("mock embedding provider is pure") {
  const auto p = EmbeddingProvider::mock(64, 11);
  const auto a = p.embed("chair");
  p.embed("table");
  CHECK(p.embed("chair") == a);
  CHECK(EmbeddingProvider::mock(64, 11).embed("chair") == a);
  CHECK(EmbeddingProvider::mock(64, 12).embed("chair") != a);
  CHECK(a.size() == 64);
  CHECK(std::abs(dot(a, a) - 1.0) < 1e-12);

  const auto dir = temp_dir("provider");
  save_tensor(dir / "v.svlt", Tensor({3}, {1, 2, 3}));
  CHECK(EmbeddingProvider::file(3).embed((dir / "v.svlt").string()) == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(EmbeddingProvider::file(4).embed((dir / "v.svlt").string()), Error);
}

TEST_CASE("synthetic triplets") {
  SynthConfig cfg;
  const SynthDataset a = synth_triplets(cfg);
  CHECK(a.train.samples.size() + a.test.samples.size() == 192);
  CHECK(a.classes.size() == 3);
  CHECK(a.prompts.shape() == Shape{3, 512});

  const SynthDataset b = synth_triplets(cfg);
  REQUIRE(b.train.samples.size() == a.train.samples.size());
  for (std::size_t i = 0; i < a.train.samples.size(); ++i) {
    CHECK(a.train.samples[i].id == b.train.samples[i].id);
    CHECK(a.train.samples[i].image == b.train.samples[i].image);
    CHECK(a.train.samples[i].cloud.points() == b.train.samples[i].cloud.points());
  }

  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = dot(a.prompts.data().subspan(i * 512, 512), a.prompts.data().subspan(j * 512, 512));
      CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-12);
    }

  for (const Dataset* ds : {&a.train, &a.test})
    for (const Sample& s : ds->samples) {
      CHECK(s.label.has_value());
      CHECK(dot(s.text, s.image) > 0.95);
      CHECK(s.cloud.size() == cfg.points);
    }

  SynthConfig big = cfg;
  big.n_classes = synth_class_capacity() + 1;
  CHECK_THROWS_AS(synth_triplets(big), Error);
  SynthConfig narrow = cfg;
  narrow.dim = 2;
  CHECK_THROWS_AS(synth_triplets(narrow), Error);
}

TEST_CASE("write_synth then load_dataset") {
  SynthConfig cfg;
  cfg.n_per_class = 8;
  cfg.dim = 16;
  cfg.points = 32;
  const SynthDataset d = synth_triplets(cfg);
  const auto dir = temp_dir("synth");
  write_synth(d, dir);
  const Dataset train = load_dataset(dir / "train.jsonl");
  REQUIRE(train.samples.size() == d.train.samples.size());
  CHECK(train.dim == 16);
  CHECK(train.samples[0].image == d.train.samples[0].image);
  CHECK(train.samples[0].cloud.points() == d.train.samples[0].cloud.points());
  CHECK(train.samples[0].label == d.train.samples[0].label);
  CHECK(load_tensor(dir / "prompts.svlt").values() == d.prompts.values());
  CHECK(fs::exists(dir / "labels.json"));
  CHECK(load_manifest(dir / "manifest.jsonl").size() == 24);
}
