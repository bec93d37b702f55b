#include "padt/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "padt/errors.hpp"

namespace padt {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'D', 'T', 'T', 'N', 'S', 'R'};

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ag::ParamStore& params,
                     const std::string& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 8);
  write_u64(out, 1);  // version
  write_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_u64(out, static_cast<uint64_t>(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const ag::Mat& m = params.value(i);
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, static_cast<uint64_t>(m.rows()));
    write_u64(out, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw IoError("not a checkpoint file: " + path);
  Checkpoint ck;
  ck.version = static_cast<uint32_t>(read_u64(in));
  if (ck.version != 1) throw IoError("unsupported checkpoint version");
  const uint64_t meta_len = read_u64(in);
  ck.meta.resize(meta_len);
  in.read(ck.meta.data(), static_cast<std::streamsize>(meta_len));
  const uint64_t count = read_u64(in);
  ck.tensors.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const uint64_t rows = read_u64(in);
    const uint64_t cols = read_u64(in);
    ag::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (uint64_t r = 0; r < rows; ++r)
      for (uint64_t c = 0; c < cols; ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
    if (!in) throw IoError("checkpoint truncated: " + path);
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

void apply_checkpoint(ag::ParamStore& params, const Checkpoint& ck) {
  if (static_cast<int>(ck.tensors.size()) != params.size())
    throw ConfigError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                      " tensors, store expects " +
                      std::to_string(params.size()));
  for (const auto& [name, m] : ck.tensors) {
    if (!params.has(name))
      throw ConfigError("checkpoint tensor has no matching parameter: " + name);
    ag::Mat& dst = params.value(params.index_of(name));
    if (dst.rows() != m.rows() || dst.cols() != m.cols())
      throw ShapeError("checkpoint tensor shape mismatch for " + name);
    dst = m;
  }
}

}  // namespace padt
