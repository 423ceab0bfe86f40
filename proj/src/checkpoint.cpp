/*
 * Copyright 2026 The kper Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kper/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "kper/errors.hpp"

namespace kper {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t k = 0; k < sizeof(T); ++k) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * k)) & 0xff));
  }
}

void put_string(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string() { return get_bytes(get<std::uint32_t>()); }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(origin_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::vector<std::pair<std::string, const Matrix*>> tensors_of(const Checkpoint& c) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  c.params.for_each([&](std::string_view n, const Matrix& m) { out.emplace_back(std::string(n), &m); });
  if (c.adam) {
    c.adam->m.for_each(
        [&](std::string_view n, const Matrix& m) { out.emplace_back("adam_m." + std::string(n), &m); });
    c.adam->v.for_each(
        [&](std::string_view n, const Matrix& m) { out.emplace_back("adam_v." + std::string(n), &m); });
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out = "KPER";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const auto tensors = tensors_of(c);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_string(out, name);
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, m->rows());
    put_le<std::uint64_t>(out, m->cols());
  }
  for (const auto& [name, m] : tensors) {
    for (double x : m->flat()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }

  std::string text = c.config.to_text();
  text += "epoch=" + std::to_string(c.epoch) + "\n";
  text += "best_metric=" + format_double(c.best_metric) + "\n";
  text += "best_epoch=" + std::to_string(c.best_epoch) + "\n";
  text += "epochs_since_best=" + std::to_string(c.epochs_since_best) + "\n";
  if (c.adam) text += "adam_step=" + std::to_string(c.adam->step) + "\n";
  for (const auto& [k, v] : c.meta) text += "meta." + k + "=" + v + "\n";
  put_le<std::uint64_t>(out, text.size());
  out += text;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.get_bytes(4) != "KPER") r.fail("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  struct Header {
    std::string name;
    std::uint64_t rows, cols;
  };
  std::vector<Header> headers;
  for (std::uint32_t t = 0; t < count; ++t) {
    Header h;
    h.name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank != 2) r.fail("tensor " + h.name + " has rank " + std::to_string(rank));
    h.rows = r.get<std::uint64_t>();
    h.cols = r.get<std::uint64_t>();
    headers.push_back(std::move(h));
  }
  std::map<std::string, Matrix> loaded;
  for (const auto& h : headers) {
    Matrix m(h.rows, h.cols);
    for (double& x : m.flat()) x = std::bit_cast<double>(r.get<std::uint64_t>());
    loaded.emplace(h.name, std::move(m));
  }
  const std::string text = r.get_bytes(r.get<std::uint64_t>());
  if (!r.done()) r.fail("trailing bytes after config block");

  Checkpoint c;
  bool has_adam = false;
  std::uint64_t adam_step = 0;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::string config_text;
  while (std::getline(in, line)) {
    ++lineno;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key=value in config block");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "epoch") c.epoch = std::stoull(value);
    else if (key == "best_metric") c.best_metric = std::stod(value);
    else if (key == "best_epoch") c.best_epoch = std::stoull(value);
    else if (key == "epochs_since_best") c.epochs_since_best = std::stoull(value);
    else if (key == "adam_step") {
      has_adam = true;
      adam_step = std::stoull(value);
    } else if (key.rfind("meta.", 0) == 0) c.meta[key.substr(5)] = value;
    else config_text += line + "\n";
  }
  c.config = TrainConfig::from_text(config_text, origin);

  auto take = [&](const std::string& name, Matrix& dst) {
    auto it = loaded.find(name);
    if (it == loaded.end()) r.fail("missing tensor " + name);
    dst = std::move(it->second);
    loaded.erase(it);
  };
  c.params.for_each([&](std::string_view n, Matrix& m) { take(std::string(n), m); });
  if (has_adam) {
    AdamState st;
    st.step = adam_step;
    st.m.for_each([&](std::string_view n, Matrix& m) { take("adam_m." + std::string(n), m); });
    st.v.for_each([&](std::string_view n, Matrix& m) { take("adam_v." + std::string(n), m); });
    c.adam = std::move(st);
  }
  if (!loaded.empty()) r.fail("unexpected tensor " + loaded.begin()->first);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str(), path.string());
}

}  // namespace kper
