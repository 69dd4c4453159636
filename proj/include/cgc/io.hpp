#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cgc/tensor.hpp"

namespace cgc {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

// Tensor wire format: one ASCII header line "shape: d0 d1 ... dn" followed by
// numel raw little-endian float64 values in row-major order.

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os << "shape:";
  for (std::size_t d : t.shape) os << ' ' << d;
  os << '\n';
  for (const T& v : t.data) {
    const double d = static_cast<double>(v);
    os.write(reinterpret_cast<const char*>(&d), sizeof(double));
  }
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("tensor read: missing shape header");
  std::istringstream hs(line);
  std::string tag;
  hs >> tag;
  if (tag != "shape:") throw std::runtime_error("tensor read: bad header line '" + line + "'");
  Shape shape;
  std::size_t d = 0;
  while (hs >> d) shape.push_back(d);
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    double v = 0.0;
    is.read(reinterpret_cast<char*>(&v), sizeof(double));
    if (!is) throw std::runtime_error("tensor read: truncated payload at element " + std::to_string(i));
    t.data[i] = static_cast<T>(v);
  }
  return t;
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_tensor(os, t);
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return read_tensor<T>(is);
}

// ---------------------------------------------------------------------------
// Checkpoint: a key=value config header, a blank line, then named tensor
// sections ("name: <id>" + tensor wire format each).
// ---------------------------------------------------------------------------

template <typename T>
struct Checkpoint {
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor<T>>> tensors;

  void add(const std::string& name, const Tensor<T>& t) { tensors.emplace_back(name, t); }

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

template <typename T>
void write_checkpoint(std::ostream& os, const Checkpoint<T>& ckpt) {
  os << "cgc-checkpoint 1\n";
  for (const auto& [k, v] : ckpt.config) os << k << '=' << v << '\n';
  os << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    os << "name: " << name << '\n';
    write_tensor(os, t);
  }
}

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& is) {
  Checkpoint<T> ckpt;
  std::string line;
  if (!std::getline(is, line) || line != "cgc-checkpoint 1")
    throw std::runtime_error("checkpoint read: bad magic line '" + line + "'");
  while (std::getline(is, line)) {
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("checkpoint read: malformed config line '" + line + "'");
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("name: ", 0) != 0)
      throw std::runtime_error("checkpoint read: expected tensor section, got '" + line + "'");
    const std::string name = line.substr(6);
    ckpt.tensors.emplace_back(name, read_tensor<T>(is));
  }
  return ckpt;
}

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_checkpoint(os, ckpt);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return read_checkpoint<T>(is);
}

}  // namespace cgc
