#include "tagrec/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "tagrec/errors.hpp"

namespace tagrec {

namespace {

constexpr std::uint32_t kEncoderMagic = 0x54475245;  // "TGRE"
constexpr std::uint32_t kMfMagic = 0x5447524D;       // "TGRM"
constexpr std::uint32_t kVersion = 1;

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  unsigned char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), bytes);
}

std::uint64_t get_le(const unsigned char* buf, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v, 4); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v, 8); }
void BinaryWriter::i32(std::int32_t v) { put_le(out_, static_cast<std::uint32_t>(v), 4); }
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::f64_array(const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) f64(data[i]);
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryReader::fill(unsigned char* buf, std::size_t n) {
  in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw DataError("checkpoint truncated");
  }
}

std::uint32_t BinaryReader::u32() {
  unsigned char buf[4];
  fill(buf, 4);
  return static_cast<std::uint32_t>(get_le(buf, 4));
}

std::uint64_t BinaryReader::u64() {
  unsigned char buf[8];
  fill(buf, 8);
  return get_le(buf, 8);
}

std::int32_t BinaryReader::i32() { return static_cast<std::int32_t>(u32()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

void BinaryReader::f64_array(double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = f64();
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > (1u << 20)) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  if (n > 0) {
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("checkpoint truncated");
  }
  return s;
}

void save_encoder_checkpoint(const std::string& path, const EncoderCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  BinaryWriter w(out);
  w.u32(kEncoderMagic);
  w.u32(kVersion);
  const EncoderConfig& c = ckpt.config;
  w.i32(c.s_max);
  w.i32(c.w_max);
  w.i32(c.embed_dim);
  w.i32(c.hidden_dim);
  w.i32(c.attn_dim);
  w.i32(c.n_tags);
  w.f64(c.learning_rate);
  w.i32(c.batch_size);
  w.i32(c.epochs);
  w.u64(c.seed);
  w.i32(ckpt.vocab_size);
  visit_encoder_blocks(
      [&w](const char*, const auto& block) {
        w.u64(static_cast<std::uint64_t>(block.rows()));
        w.u64(static_cast<std::uint64_t>(block.cols()));
        w.f64_array(block.data(), static_cast<std::size_t>(block.size()));
      },
      ckpt.params);
  if (!out) throw DataError("write failed: " + path);
}

EncoderCheckpoint load_encoder_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  BinaryReader r(in);
  if (r.u32() != kEncoderMagic) throw DataError("not an encoder checkpoint: " + path);
  if (r.u32() != kVersion) throw DataError("unsupported checkpoint version: " + path);
  EncoderCheckpoint ckpt;
  EncoderConfig& c = ckpt.config;
  c.s_max = r.i32();
  c.w_max = r.i32();
  c.embed_dim = r.i32();
  c.hidden_dim = r.i32();
  c.attn_dim = r.i32();
  c.n_tags = r.i32();
  c.learning_rate = r.f64();
  c.batch_size = r.i32();
  c.epochs = r.i32();
  c.seed = r.u64();
  ckpt.vocab_size = r.i32();
  visit_encoder_blocks(
      [&r](const char* name, auto& block) {
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        if (rows > (1u << 26) || cols > (1u << 26)) {
          throw DataError(std::string("implausible block shape for ") + name);
        }
        block.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        r.f64_array(block.data(), static_cast<std::size_t>(block.size()));
      },
      ckpt.params);
  return ckpt;
}

void save_mf_checkpoint(const std::string& path, const MfCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  BinaryWriter w(out);
  w.u32(kMfMagic);
  w.u32(kVersion);
  const MfConfig& c = ckpt.config;
  w.u32(c.loss == LossKind::bpr ? 0 : 1);
  w.i32(c.latent_dim);
  w.f64(c.l2);
  w.i32(c.epochs);
  w.f64(c.learning_rate);
  w.i32(c.max_warp_trials);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.dense_mode));
  w.u32(static_cast<std::uint32_t>(ckpt.item_features));
  w.i32(ckpt.split_p);
  w.u64(ckpt.split_seed);
  w.str(ckpt.name);
  const FactorizationModel& m = ckpt.model;
  w.i32(m.d);
  w.f64(m.l2);
  w.u32(static_cast<std::uint32_t>(m.dense_mode));
  w.i32(m.dense_dim);
  w.i32(m.n_user_features);
  w.i32(m.n_item_features);
  const auto arr = [&w](const std::vector<double>& v) {
    w.u64(v.size());
    w.f64_array(v.data(), v.size());
  };
  arr(m.user_vectors);
  arr(m.item_vectors);
  arr(m.user_biases);
  arr(m.item_biases);
  arr(m.dense_bias_w);
  w.f64(m.dense_bias_intercept);
  arr(m.dense_factor_w);
  if (!out) throw DataError("write failed: " + path);
}

MfCheckpoint load_mf_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  BinaryReader r(in);
  if (r.u32() != kMfMagic) throw DataError("not an mf checkpoint: " + path);
  if (r.u32() != kVersion) throw DataError("unsupported checkpoint version: " + path);
  MfCheckpoint ckpt;
  MfConfig& c = ckpt.config;
  c.loss = r.u32() == 0 ? LossKind::bpr : LossKind::warp;
  c.latent_dim = r.i32();
  c.l2 = r.f64();
  c.epochs = r.i32();
  c.learning_rate = r.f64();
  c.max_warp_trials = r.i32();
  c.seed = r.u64();
  c.dense_mode = static_cast<DenseMode>(r.u32());
  ckpt.item_features = static_cast<FeatureKind>(r.u32());
  ckpt.split_p = r.i32();
  ckpt.split_seed = r.u64();
  ckpt.name = r.str();
  FactorizationModel& m = ckpt.model;
  m.d = r.i32();
  m.l2 = r.f64();
  m.dense_mode = static_cast<DenseMode>(r.u32());
  m.dense_dim = r.i32();
  m.n_user_features = r.i32();
  m.n_item_features = r.i32();
  const auto arr = [&r](std::vector<double>& v) {
    const std::uint64_t n = r.u64();
    if (n > (1ull << 32)) throw DataError("implausible array length in checkpoint");
    v.resize(n);
    r.f64_array(v.data(), v.size());
  };
  arr(m.user_vectors);
  arr(m.item_vectors);
  arr(m.user_biases);
  arr(m.item_biases);
  arr(m.dense_bias_w);
  m.dense_bias_intercept = r.f64();
  arr(m.dense_factor_w);
  const auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw DataError(std::string("checkpoint size mismatch: ") + what);
  };
  expect(m.user_vectors.size(), static_cast<std::size_t>(m.n_user_features) * m.d, "user_vectors");
  expect(m.item_vectors.size(), static_cast<std::size_t>(m.n_item_features) * m.d, "item_vectors");
  expect(m.user_biases.size(), static_cast<std::size_t>(m.n_user_features), "user_biases");
  expect(m.item_biases.size(), static_cast<std::size_t>(m.n_item_features), "item_biases");
  return ckpt;
}

}  // namespace tagrec
