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

#include "kper/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kper/errors.hpp"

namespace kper {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"dim", u(dim)},
      {"depth", u(depth)},
      {"sample_size", u(sample_size)},
      {"batch_size", u(batch_size)},
      {"learning_rate", format_double(learning_rate)},
      {"lambda1", format_double(lambda1)},
      {"lambda2", format_double(lambda2)},
      {"eta", format_double(eta)},
      {"tau", format_double(tau)},
      {"seeds_per_side", u(seeds_per_side)},
      {"seed_exclusion", format_double(seed_exclusion)},
      {"max_epochs", u(max_epochs)},
      {"patience", u(patience)},
      {"seed", u(seed)},
      {"threads", u(threads)},
      {"use_referencing", b(use_referencing)},
      {"masked_referencing", b(masked_referencing)},
      {"freeze_negatives", b(freeze_negatives)},
      {"val_max_users", u(val_max_users)},
      {"eval_top_k", u(eval_top_k)},
  };
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_pairs()) out += k + "=" + v + "\n";
  return out;
}

void TrainConfig::set(const std::string& raw_key, const std::string& value) {
  using U = std::size_t;
  // command-line spellings are accepted too
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "d") key = "dim";
  else if (key == "K") key = "depth";
  else if (key == "l") key = "sample_size";
  else if (key == "batch") key = "batch_size";
  else if (key == "lr") key = "learning_rate";
  if (key == "dim") dim = parse_number<U>(key, value);
  else if (key == "depth") depth = parse_number<U>(key, value);
  else if (key == "sample_size") sample_size = parse_number<U>(key, value);
  else if (key == "batch_size") batch_size = parse_number<U>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "lambda1") lambda1 = parse_number<double>(key, value);
  else if (key == "lambda2") lambda2 = parse_number<double>(key, value);
  else if (key == "eta") eta = parse_number<double>(key, value);
  else if (key == "tau") tau = parse_number<double>(key, value);
  else if (key == "seeds_per_side") seeds_per_side = parse_number<U>(key, value);
  else if (key == "seed_exclusion") seed_exclusion = parse_number<double>(key, value);
  else if (key == "max_epochs") max_epochs = parse_number<U>(key, value);
  else if (key == "patience") patience = parse_number<U>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "threads") threads = parse_number<U>(key, value);
  else if (key == "use_referencing") use_referencing = parse_bool(key, value);
  else if (key == "masked_referencing") masked_referencing = parse_bool(key, value);
  else if (key == "freeze_negatives") freeze_negatives = parse_bool(key, value);
  else if (key == "val_max_users") val_max_users = parse_number<U>(key, value);
  else if (key == "eval_top_k") eval_top_k = parse_number<U>(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

void TrainConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key=value");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& origin) {
  TrainConfig c;
  c.merge_text(text, origin);
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path.string());
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (dim == 0) fail("dim must be positive");
  if (sample_size == 0) fail("sample_size must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambda1 and lambda2 must be non-negative");
  if (!(eta < 0.0)) fail("eta must be negative");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (!(seed_exclusion >= 0.0 && seed_exclusion < 1.0)) fail("seed_exclusion must be in [0, 1)");
  if (eval_top_k == 0) fail("eval_top_k must be positive");
}

std::string TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kper
