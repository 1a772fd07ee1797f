// Copyright 2026 The essayscore Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "essayscore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore {

namespace {

constexpr std::string_view kMagic = "essayscore-checkpoint";

void put_f64_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double get_f64_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string line(std::string_view what) {
    std::string s;
    if (!std::getline(in_, s)) throw InputError("checkpoint truncated while reading " + std::string(what));
    return s;
  }

  /// Reads "<key> <value>" and returns value.
  std::string field(std::string_view key) {
    const std::string s = line(key);
    if (s.size() <= key.size() || s.compare(0, key.size(), key) != 0 || s[key.size()] != ' ') {
      throw InputError("checkpoint: expected '" + std::string(key) + " <value>', found '" + s + "'");
    }
    return s.substr(key.size() + 1);
  }

  std::size_t count(std::string_view key) {
    const std::string v = field(key);
    try {
      std::size_t pos = 0;
      const unsigned long long n = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw InputError("checkpoint: bad integer '" + v + "' for " + std::string(key));
    }
  }

  std::istream& stream() { return in_; }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model, const Vocabulary& vocab) {
  const ModelSpec& s = model.spec();
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "model.vocab_size " << s.vocab_size << '\n';
  out << "model.max_seq_len " << s.max_seq_len << '\n';
  out << "model.d_model " << s.d_model << '\n';
  out << "model.n_layers " << s.n_layers << '\n';
  out << "model.n_heads " << s.n_heads << '\n';
  out << "model.d_ff " << s.d_ff << '\n';
  out << "model.dropout_p " << format_double(s.dropout_p) << '\n';
  out << "model.pooling " << to_string(s.pooling) << '\n';
  out << "model.n_targets " << s.n_targets << '\n';
  out << "vocab " << vocab.tokens().size() << '\n';
  for (const auto& t : vocab.tokens()) out << t << '\n';
  const auto params = model.parameters();
  out << "params " << params.size() << '\n';
  for (const auto& p : params) {
    out << "param " << p.path << ' ' << p.tensor.rank();
    for (auto d : p.tensor.shape()) out << ' ' << d;
    out << '\n';
    for (double v : p.tensor.data()) put_f64_le(out, v);
  }
  out << "end\n";
  if (!out) throw InputError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, model, vocab);
}

Checkpoint read_checkpoint(std::istream& in) {
  LineReader r(in);
  const std::string magic = r.line("header");
  const std::string expected = std::string(kMagic) + " " + std::to_string(kCheckpointVersion);
  if (magic.rfind(kMagic, 0) != 0) throw InputError("not an essayscore checkpoint");
  if (magic != expected) throw InputError("unsupported checkpoint version: '" + magic + "'");

  ModelSpec spec;
  spec.vocab_size = r.count("model.vocab_size");
  spec.max_seq_len = r.count("model.max_seq_len");
  spec.d_model = r.count("model.d_model");
  spec.n_layers = r.count("model.n_layers");
  spec.n_heads = r.count("model.n_heads");
  spec.d_ff = r.count("model.d_ff");
  spec.dropout_p = parse_double(r.field("model.dropout_p"), "model.dropout_p");
  spec.pooling = parse_pooling_mode(r.field("model.pooling"));
  spec.n_targets = r.count("model.n_targets");
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw InputError(std::string("checkpoint: invalid model spec: ") + e.what());
  }

  const std::size_t n_tokens = r.count("vocab");
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) tokens.push_back(r.line("vocabulary"));
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));
  if (vocab.size() != spec.vocab_size) {
    throw InputError("checkpoint: vocabulary has " + std::to_string(vocab.size()) +
                     " ids but model.vocab_size is " + std::to_string(spec.vocab_size));
  }

  Model model = Model::init(spec, 0);
  auto params = model.parameters();
  const std::size_t n_params = r.count("params");
  if (n_params != params.size()) {
    throw InputError("checkpoint: " + std::to_string(n_params) + " parameters stored, model expects " +
                     std::to_string(params.size()));
  }
  std::vector<unsigned char> bytes;
  for (auto& p : params) {
    std::istringstream header(r.field("param"));
    std::string path;
    std::size_t rank = 0;
    header >> path >> rank;
    Shape shape(rank);
    for (auto& d : shape) header >> d;
    if (!header || path != p.path || shape != p.tensor.shape()) {
      throw InputError("checkpoint: expected parameter " + p.path + " " +
                       shape_string(p.tensor.shape()) + ", found '" + path + "' " + shape_string(shape));
    }
    const std::size_t n = shape_size(shape);
    bytes.resize(n * 8);
    r.stream().read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(r.stream().gcount()) != bytes.size()) {
      throw InputError("checkpoint: truncated payload for " + p.path);
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < n; ++i) dst[i] = get_f64_le(bytes.data() + 8 * i);
  }
  if (r.line("trailer") != "end") throw InputError("checkpoint: missing end marker");
  return {std::move(model), std::move(vocab)};
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace essayscore
