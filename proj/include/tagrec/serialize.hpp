#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tagrec/encoder.hpp"
#include "tagrec/factorization.hpp"

namespace tagrec {

// Little-endian binary stream helpers. Checkpoints are written with
// these so files move between machines unchanged.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v);
  void f64(double v);
  void f64_array(const double* data, std::size_t n);
  void str(const std::string& s);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32();
  double f64();
  void f64_array(double* data, std::size_t n);
  std::string str();

 private:
  void fill(unsigned char* buf, std::size_t n);
  std::istream& in_;
};

struct EncoderCheckpoint {
  EncoderConfig config;
  int vocab_size = 0;
  EncoderParams params;
};

void save_encoder_checkpoint(const std::string& path, const EncoderCheckpoint& ckpt);
EncoderCheckpoint load_encoder_checkpoint(const std::string& path);

struct MfCheckpoint {
  MfConfig config;
  FeatureKind item_features = FeatureKind::identity;
  int split_p = 0;
  std::uint64_t split_seed = 0;
  std::string name;  // label used in evaluation reports
  FactorizationModel model;
};

void save_mf_checkpoint(const std::string& path, const MfCheckpoint& ckpt);
MfCheckpoint load_mf_checkpoint(const std::string& path);

}  // namespace tagrec
