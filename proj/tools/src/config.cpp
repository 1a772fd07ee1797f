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

#include "essayscore/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>

#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(value) +
                    "' (expected " + std::string(expected) + ")");
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  const auto v = parse_u64(key, value);
  if (v > std::numeric_limits<std::size_t>::max()) bad_value(key, value, "a smaller integer");
  return static_cast<std::size_t>(v);
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    return parse_double(value, key);
  } catch (const ValidationError&) {
    bad_value(key, value, "a number");
  }
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "off" || value == "no" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> items;
  while (true) {
    const auto comma = value.find(',');
    items.push_back(trim(value.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return items;
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <typename Member>
Field size_field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_size(k, v); }};
}

template <typename Member>
Field real_field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return format_double(member(c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_real(k, v); }};
}

template <typename Member>
Field bool_field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return bool_text(member(c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); }};
}

template <typename Member>
Field seed_field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_u64(k, v); }};
}

template <typename Member>
Field path_field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return member(c).string(); },
          [member](RunConfig& c, std::string_view, std::string_view v) {
            member(c) = std::filesystem::path(std::string(v));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(size_field("model.max_seq_len", [](auto& c) -> auto& { return c.model.max_seq_len; }));
    f.push_back(size_field("model.d_model", [](auto& c) -> auto& { return c.model.d_model; }));
    f.push_back(size_field("model.n_layers", [](auto& c) -> auto& { return c.model.n_layers; }));
    f.push_back(size_field("model.n_heads", [](auto& c) -> auto& { return c.model.n_heads; }));
    f.push_back(size_field("model.d_ff", [](auto& c) -> auto& { return c.model.d_ff; }));
    f.push_back(real_field("model.dropout_p", [](auto& c) -> auto& { return c.model.dropout_p; }));
    f.push_back({"model.pooling", [](const RunConfig& c) { return std::string(to_string(c.model.pooling)); },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   try {
                     c.model.pooling = parse_pooling_mode(v);
                   } catch (const Error&) {
                     bad_value(k, v, "single_attention, six_metric_attention or mean");
                   }
                 }});

    f.push_back(size_field("train.epochs", [](auto& c) -> auto& { return c.train.epochs; }));
    f.push_back(size_field("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    f.push_back(real_field("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }));
    f.push_back(real_field("train.weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; }));
    f.push_back(real_field("train.adam_beta1", [](auto& c) -> auto& { return c.train.adam_beta1; }));
    f.push_back(real_field("train.adam_beta2", [](auto& c) -> auto& { return c.train.adam_beta2; }));
    f.push_back(real_field("train.adam_eps", [](auto& c) -> auto& { return c.train.adam_eps; }));
    f.push_back(bool_field("train.awp", [](auto& c) -> auto& { return c.train.awp; }));
    f.push_back(real_field("train.adv_lr", [](auto& c) -> auto& { return c.train.adv_lr; }));
    f.push_back(real_field("train.adv_eps", [](auto& c) -> auto& { return c.train.adv_eps; }));
    f.push_back(size_field("train.awp_start_epoch", [](auto& c) -> auto& { return c.train.awp_start_epoch; }));
    f.push_back(size_field("train.awp_steps", [](auto& c) -> auto& { return c.train.awp_steps; }));
    f.push_back(
        bool_field("train.awp_include_heads", [](auto& c) -> auto& { return c.train.awp_include_heads; }));
    f.push_back(seed_field("train.seed", [](auto& c) -> auto& { return c.train.seed; }));
    f.push_back({"train.loss", [](const RunConfig& c) { return std::string(to_string(c.train.loss)); },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   try {
                     c.train.loss = parse_loss_kind(v);
                   } catch (const Error&) {
                     bad_value(k, v, "mse or smooth_l1");
                   }
                 }});
    f.push_back({"train.grad_clip_norm",
                 [](const RunConfig& c) {
                   return c.train.grad_clip_norm ? format_double(*c.train.grad_clip_norm) : std::string("none");
                 },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "none" || v.empty()) {
                     c.train.grad_clip_norm.reset();
                   } else {
                     c.train.grad_clip_norm = parse_real(k, v);
                   }
                 }});
    f.push_back(bool_field("train.init_output_bias_to_mean",
                           [](auto& c) -> auto& { return c.train.init_output_bias_to_mean; }));
    f.push_back(bool_field("train.eval_train_each_epoch",
                           [](auto& c) -> auto& { return c.train.eval_train_each_epoch; }));

    f.push_back(path_field("data.train", [](auto& c) -> auto& { return c.data_train; }));
    f.push_back(path_field("data.valid", [](auto& c) -> auto& { return c.data_valid; }));
    f.push_back(real_field("data.valid_fraction", [](auto& c) -> auto& { return c.valid_fraction; }));
    f.push_back(size_field("data.min_count", [](auto& c) -> auto& { return c.min_count; }));

    f.push_back(size_field("cv.k", [](auto& c) -> auto& { return c.cv_k; }));
    f.push_back(seed_field("cv.seed", [](auto& c) -> auto& { return c.cv_seed; }));
    f.push_back(bool_field("cv.save_checkpoints", [](auto& c) -> auto& { return c.cv_save_checkpoints; }));

    f.push_back(size_field("ablate.seeds", [](auto& c) -> auto& { return c.ablate_seeds; }));
    f.push_back({"ablate.pooling",
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto mode : c.ablate_pooling) {
                     if (!out.empty()) out += ',';
                     out += to_string(mode);
                   }
                   return out;
                 },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   std::vector<PoolingMode> modes;
                   for (const auto item : split_list(v)) {
                     try {
                       modes.push_back(parse_pooling_mode(item));
                     } catch (const Error&) {
                       bad_value(k, v, "a comma list of single_attention, six_metric_attention, mean");
                     }
                   }
                   c.ablate_pooling = std::move(modes);
                 }});
    f.push_back({"ablate.awp",
                 [](const RunConfig& c) {
                   std::string out;
                   for (const bool on : c.ablate_awp) {
                     if (!out.empty()) out += ',';
                     out += on ? "on" : "off";
                   }
                   return out;
                 },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   std::vector<bool> flags;
                   for (const auto item : split_list(v)) flags.push_back(parse_bool(k, item));
                   c.ablate_awp = std::move(flags);
                 }});

    f.push_back(path_field("output.dir", [](auto& c) -> auto& { return c.output_dir; }));
    f.push_back(size_field("jobs", [](auto& c) -> auto& { return c.jobs; }));

    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return std::string_view(a.key) < b.key; });
    return f;
  }();
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  find_field(key).set(*this, key, trim(value));
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out.emplace(f.key, f.get(*this));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw ConfigError("data.valid_fraction must lie strictly between 0 and 1");
  }
  if (min_count < 1) throw ConfigError("data.min_count must be at least 1");
  if (cv_k < 2) throw ConfigError("cv.k must be at least 2");
  if (ablate_seeds < 1) throw ConfigError("ablate.seeds must be at least 1");
  if (ablate_pooling.empty()) throw ConfigError("ablate.pooling must name at least one mode");
  if (ablate_awp.empty()) throw ConfigError("ablate.awp must list at least one setting");
  for (std::size_t i = 0; i < ablate_pooling.size(); ++i) {
    for (std::size_t j = i + 1; j < ablate_pooling.size(); ++j) {
      if (ablate_pooling[i] == ablate_pooling[j]) throw ConfigError("ablate.pooling lists a mode twice");
    }
  }
  if (ablate_awp.size() > 2 || (ablate_awp.size() == 2 && ablate_awp[0] == ablate_awp[1])) {
    throw ConfigError("ablate.awp lists a setting twice");
  }
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

void apply_config(std::istream& in, RunConfig& config, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = std::string(trim(text.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "missing key before '='");
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ConfigError(where + "key '" + key + "' set twice");
    }
    seen.push_back(key);
    try {
      config.set(key, text.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_config_file(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  apply_config(in, config, path.string());
}

void apply_override(std::string_view assignment, RunConfig& config) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  config.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void write_resolved(std::ostream& out, const RunConfig& config) {
  for (const auto& [key, value] : config.resolved()) out << key << " = " << value << '\n';
}

}  // namespace essayscore::cli
