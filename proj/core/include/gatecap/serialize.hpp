#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "gatecap/tensor.hpp"

namespace gatecap {

// Little-endian binary writer/reader for the checkpoint and sparse-model
// formats. The toolchain targets little-endian hosts; raw payloads are
// written natively.
static_assert(sizeof(double) == 8, "64-bit IEEE doubles required");

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : f_(std::fopen(path.c_str(), "wb")), path_(path) {
    if (!f_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  ~BinWriter() {
    if (f_) std::fclose(f_);
  }
  BinWriter(const BinWriter&) = delete;
  BinWriter& operator=(const BinWriter&) = delete;

  void bytes(const void* p, std::size_t n) {
    if (n != 0 && std::fwrite(p, 1, n, f_) != n) {
      throw std::runtime_error("short write to " + path_);
    }
  }
  void magic(const char m[4]) { bytes(m, 4); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void named_tensor(const std::string& name, const Tensor& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    bytes(t.data(), t.numel() * sizeof(double));
  }

 private:
  std::FILE* f_;
  std::string path_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : f_(std::fopen(path.c_str(), "rb")), path_(path) {
    if (!f_) throw std::runtime_error("cannot open " + path);
  }
  ~BinReader() {
    if (f_) std::fclose(f_);
  }
  BinReader(const BinReader&) = delete;
  BinReader& operator=(const BinReader&) = delete;

  void bytes(void* p, std::size_t n) {
    if (n != 0 && std::fread(p, 1, n, f_) != n) {
      throw std::runtime_error("unexpected end of file in " + path_);
    }
  }
  void expect_magic(const char m[4]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) {
      throw std::runtime_error(path_ + ": bad magic, expected " + std::string(m, 4));
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::pair<std::string, Tensor> named_tensor() {
    std::string name = str();
    std::uint32_t rank = u32();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(u64());
      n *= d;
    }
    std::vector<double> data(n);
    bytes(data.data(), n * sizeof(double));
    return {std::move(name), Tensor(std::move(shape), std::move(data))};
  }

 private:
  std::FILE* f_;
  std::string path_;
};

}  // namespace gatecap
