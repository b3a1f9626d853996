/*
 * Copyright 2026 gaitmix contributors
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

#include "gaitmix/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace gaitmix {
namespace {

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* doc;
};

// '#' stands for a domain index.
constexpr KeySpec kSchema[] = {
    {"synth.dim", "16", "signature length d_in"},
    {"synth.domains", "2", "number of synthetic domains (recipes)"},
    {"synth.domain#.n_identities", "20", "identities in the domain"},
    {"synth.domain#.samples_per_identity", "8", "samples per identity"},
    {"synth.domain#.identity_spread", "1", "std of identity centers before scaling"},
    {"synth.domain#.intra_std", "0.1", "within-identity noise std"},
    {"synth.domain#.shift", "", "additive domain offset: d_in reals, or empty for zeros"},
    {"synth.domain#.scale", "1", "multiplicative domain gain on identity centers"},
    {"synth.domain#.dup_fraction", "0", "fraction of samples turned into near-duplicates"},
    {"synth.domain#.outlier_fraction", "0", "fraction of samples redrawn as outliers"},
    {"synth.domain#.outlier_std", "1", "std of outlier samples around their center"},
    {"synth.domain#.role", "train", "train | heldout"},
    {"model.hidden", "32", "hidden width"},
    {"model.d_emb", "16", "embedding width"},
    {"model.parts", "2", "part heads; must divide d_emb"},
    {"model.norm", "single", "single | dsbn"},
    {"model.eps", "1e-05", "normalization epsilon"},
    {"model.bn_momentum", "0.1", "running-statistic momentum"},
    {"train.steps", "2000", "SGD steps"},
    {"train.lr", "0.1", "initial learning rate"},
    {"train.decay_steps", "1200,1600", "steps at which the learning rate decays"},
    {"train.decay_factor", "0.1", "multiplicative learning-rate decay"},
    {"train.momentum", "0.9", "SGD momentum"},
    {"train.weight_decay", "0.0005", "L2 weight decay"},
    {"train.margin", "0.2", "triplet margin"},
    {"train.mining", "batch_hard", "batch_hard | all_valid"},
    {"train.triplet", "separate", "separate | naive"},
    {"train.P", "8", "identities per domain per batch"},
    {"train.K", "4", "samples per identity"},
    {"train.domain#.P", "", "per-domain override of train.P"},
    {"train.domain#.K", "", "per-domain override of train.K"},
    {"train.domain#.weight", "1", "per-domain triplet weight"},
    {"train.eval_every", "0", "evaluation interval in steps (0: end only)"},
    {"eval.gallery_per_identity", "2", "gallery samples per identity; the rest are probes"},
    {"distill.mode", "noise", "redundancy | noise"},
    {"distill.fraction", "0.2", "removal fraction per domain"},
    {"distill.pretrain_steps", "2000", "steps of per-domain pretraining"},
    {"compare.seeds", "5", "seeds per comparison cell (seed, seed+1, ...)"},
};

std::string schema_key(const std::string& key) {
  static const std::regex domain_section(R"(\.domain[0-9]+\.)");
  return std::regex_replace(key, domain_section, ".domain#.");
}

const KeySpec* find_spec(const std::string& key) {
  const std::string norm = schema_key(key);
  for (const KeySpec& s : kSchema)
    if (norm == s.key) return &s;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(std::string(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    fail(ErrorCode::format, where + ": expected a real number, got '" + t + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    fail(ErrorCode::format, where + ": expected a non-negative integer, got '" + t + "'");
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

bool getline_checked(std::istream& is, std::string& line) {
  if (!std::getline(is, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void expect_version(std::istream& is, std::string_view token, const std::string& origin) {
  std::string line;
  if (!getline_checked(is, line)) fail(ErrorCode::format, origin + ": empty file");
  if (line != token)
    fail(ErrorCode::format, origin + ": unsupported format version '" + line + "', expected '" +
                                std::string(token) + "'");
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (getline_checked(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) fail(ErrorCode::format, where + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (cfg.is_set(key)) fail(ErrorCode::format, where + ": duplicate key '" + key + "'");
    try {
      cfg.set(key, trim(std::string_view(t).substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_spec(key)) fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
  values_[key] = value;
}

std::string Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const KeySpec* spec = find_spec(key);
  if (!spec) fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
  return spec->fallback;
}

double Config::real(const std::string& key) const { return parse_real(str(key), key); }

std::size_t Config::count(const std::string& key) const {
  return static_cast<std::size_t>(parse_uint(str(key), key));
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  const std::string v = trim(str(key));
  if (v.empty()) return out;
  for (const std::string& part : split(v, ',')) out.push_back(parse_real(part, key));
  return out;
}

std::vector<std::size_t> Config::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  const std::string v = trim(str(key));
  if (v.empty()) return out;
  for (const std::string& part : split(v, ','))
    out.push_back(static_cast<std::size_t>(parse_uint(part, key)));
  return out;
}

std::string Config::documentation() {
  std::ostringstream os;
  for (const KeySpec& s : kSchema)
    os << s.key << " = " << (*s.fallback ? s.fallback : "(unset)") << "    # " << s.doc << '\n';
  return os.str();
}

SynthPlan synth_plan_from(const Config& cfg) {
  SynthPlan plan;
  const std::size_t dim = cfg.count("synth.dim");
  const std::size_t n = cfg.count("synth.domains");
  if (n == 0) fail(ErrorCode::invalid_argument, "synth.domains must be positive");
  for (std::size_t k = 0; k < n; ++k) {
    const std::string p = "synth.domain" + std::to_string(k) + ".";
    DomainRecipe r;
    r.n_identities = cfg.count(p + "n_identities");
    r.samples_per_identity = cfg.count(p + "samples_per_identity");
    r.identity_spread = cfg.real(p + "identity_spread");
    r.intra_std = cfg.real(p + "intra_std");
    r.shift = cfg.reals(p + "shift");
    if (r.shift.empty()) r.shift.assign(dim, 0.0);
    if (r.shift.size() != dim)
      fail(ErrorCode::invalid_argument, p + "shift has " + std::to_string(r.shift.size()) +
                                            " values, synth.dim is " + std::to_string(dim));
    r.scale = cfg.real(p + "scale");
    r.dup_fraction = cfg.real(p + "dup_fraction");
    r.outlier_fraction = cfg.real(p + "outlier_fraction");
    r.outlier_std = cfg.real(p + "outlier_std");
    const std::string role = cfg.str(p + "role");
    const DomainId id{static_cast<std::uint32_t>(k)};
    if (role == "train")
      plan.train_domains.push_back(id);
    else if (role == "heldout")
      plan.heldout_domains.push_back(id);
    else
      fail(ErrorCode::invalid_argument, p + "role must be train or heldout");
    plan.recipes.push_back(std::move(r));
  }
  if (plan.train_domains.empty()) fail(ErrorCode::invalid_argument, "no domain has role train");
  return plan;
}

TrainConfig train_config_from(const Config& cfg, const FeatureStore& store, std::uint64_t seed) {
  TrainConfig tc;
  tc.hyper.d_in = store.dim();
  tc.hyper.hidden = cfg.count("model.hidden");
  tc.hyper.d_emb = cfg.count("model.d_emb");
  tc.hyper.parts = cfg.count("model.parts");
  tc.hyper.eps = cfg.real("model.eps");
  tc.hyper.bn_momentum = cfg.real("model.bn_momentum");
  const std::string norm = cfg.str("model.norm");
  if (norm == "single")
    tc.hyper.norm = NormMode::single;
  else if (norm == "dsbn")
    tc.hyper.norm = NormMode::dsbn;
  else
    fail(ErrorCode::invalid_argument, "model.norm must be single or dsbn");

  for (DomainId d : store.domains()) {
    const std::string p = "train.domain" + std::to_string(d.value) + ".";
    DomainDraw draw{d, cfg.is_set(p + "P") ? cfg.count(p + "P") : cfg.count("train.P"),
                    cfg.is_set(p + "K") ? cfg.count(p + "K") : cfg.count("train.K")};
    tc.batch.draws.push_back(draw);
    tc.weights[d] = cfg.real(p + "weight");
  }
  tc.triplet.margin = cfg.real("train.margin");
  const std::string mining = cfg.str("train.mining");
  if (mining == "batch_hard")
    tc.triplet.mining = Mining::batch_hard;
  else if (mining == "all_valid")
    tc.triplet.mining = Mining::all_valid;
  else
    fail(ErrorCode::invalid_argument, "train.mining must be batch_hard or all_valid");
  const std::string scope = cfg.str("train.triplet");
  if (scope == "separate")
    tc.scope = TripletScope::separate;
  else if (scope == "naive")
    tc.scope = TripletScope::naive;
  else
    fail(ErrorCode::invalid_argument, "train.triplet must be separate or naive");

  tc.schedule.initial = cfg.real("train.lr");
  tc.schedule.total_steps = cfg.count("train.steps");
  tc.schedule.decay_steps = cfg.counts("train.decay_steps");
  // Decays past the end of a shortened run are dropped.
  std::erase_if(tc.schedule.decay_steps, [&](std::size_t s) { return s >= tc.schedule.total_steps; });
  tc.schedule.decay_factor = cfg.real("train.decay_factor");
  tc.momentum = cfg.real("train.momentum");
  tc.weight_decay = cfg.real("train.weight_decay");
  tc.eval_every = cfg.count("train.eval_every");
  tc.seed = seed;
  return tc;
}

DistillPolicy distill_policy_from(const Config& cfg) {
  DistillPolicy p;
  const std::string mode = cfg.str("distill.mode");
  if (mode == "redundancy")
    p.mode = DistillMode::redundancy;
  else if (mode == "noise")
    p.mode = DistillMode::noise;
  else
    fail(ErrorCode::invalid_argument, "distill.mode must be redundancy or noise");
  p.removal_fraction = cfg.real("distill.fraction");
  p.validate();
  return p;
}

ExperimentFactory experiment_factory_from(const Config& cfg) {
  const SynthPlan plan = synth_plan_from(cfg);
  const std::size_t n_gallery = cfg.count("eval.gallery_per_identity");
  return [plan, n_gallery](std::uint64_t seed) {
    Experiment exp;
    const FeatureStore all = generate(plan.recipes, seed);
    exp.train = all.select_domains(plan.train_domains);
    exp.cross_test = all.select_domains(plan.heldout_domains);
    // Fresh identities for the seen domains: same recipes, independent draw,
    // with the injected corruption switched off.
    std::vector<DomainRecipe> clean = plan.recipes;
    for (auto& r : clean) r.dup_fraction = r.outlier_fraction = 0.0;
    exp.self_test = generate(clean, seed ^ 0x7e57da7aULL).select_domains(plan.train_domains);
    exp.gallery_per_identity = n_gallery;
    return exp;
  };
}

std::vector<Variant> variants_from_grid(const std::vector<std::string>& grid, const Config& cfg) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const std::string& item : grid) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::invalid_argument, "grid entry '" + item + "' needs key=values");
    const std::string key = item.substr(0, eq);
    if (key != "dsbn" && key != "setri" && key != "distill")
      fail(ErrorCode::invalid_argument, "unknown grid key '" + key + "' (dsbn, setri, distill)");
    auto values = split(item.substr(eq + 1), ',');
    for (const std::string& v : values)
      if (v != "off" && v != "on")
        fail(ErrorCode::invalid_argument, "grid values must be off or on, got '" + v + "'");
    axes.emplace_back(key, std::move(values));
  }
  if (axes.empty()) fail(ErrorCode::invalid_argument, "empty grid");

  const DistillPolicy policy = distill_policy_from(cfg);
  const std::size_t pretrain = cfg.count("distill.pretrain_steps");
  std::vector<Variant> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    Variant v;
    v.policy = policy;
    v.pretrain_steps = pretrain;
    std::vector<std::pair<std::string, bool>> picks;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const bool on = axes[a].second[idx[a]] == "on";
      picks.emplace_back(axes[a].first, on);
      v.name += (a ? " " : "") + axes[a].first + "=" + axes[a].second[idx[a]];
      if (axes[a].first == "distill") v.pruning = on ? DataPruning::distill : DataPruning::none;
    }
    v.apply = [picks](TrainConfig& c) {
      for (const auto& [key, on] : picks) {
        if (key == "dsbn") c.hyper.norm = on ? NormMode::dsbn : NormMode::single;
        if (key == "setri") c.scope = on ? TripletScope::separate : TripletScope::naive;
      }
    };
    out.push_back(std::move(v));
    std::size_t a = axes.size();
    while (a > 0 && ++idx[a - 1] == axes[a - 1].second.size()) idx[--a] = 0;
    if (a == 0) break;
  }
  return out;
}

void write_features(std::ostream& os, const FeatureStore& store) {
  os << kFeaturesVersion << '\n' << "id,identity,domain,flag";
  for (std::size_t j = 0; j < store.dim(); ++j) os << ",s" << j;
  os << '\n';
  for (const Sample& s : store.samples()) {
    const char flag = s.flag == TruthFlag::duplicate ? 'D' : s.flag == TruthFlag::outlier ? 'O' : '-';
    os << s.id << ',' << s.identity.label << ',' << s.identity.domain.value << ',' << flag;
    for (double v : s.signature) os << ',' << format_real(v);
    os << '\n';
  }
}

FeatureStore read_features(std::istream& is, const std::string& origin) {
  expect_version(is, kFeaturesVersion, origin);
  std::string line;
  if (!getline_checked(is, line)) fail(ErrorCode::format, origin + ": missing header line");
  const auto header = split(line, ',');
  if (header.size() < 5 || header[0] != "id" || header[1] != "identity" || header[2] != "domain" ||
      header[3] != "flag")
    fail(ErrorCode::format, origin + ": header must be id,identity,domain,flag,s0,...");
  const std::size_t dim = header.size() - 4;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[4 + j] != "s" + std::to_string(j))
      fail(ErrorCode::format, origin + ": bad signature column '" + header[4 + j] + "'");
  std::vector<Sample> samples;
  std::size_t lineno = 2;
  while (getline_checked(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      fail(ErrorCode::format, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    Sample s;
    s.id = parse_uint(cells[0], where);
    s.identity.label = static_cast<std::uint32_t>(parse_uint(cells[1], where));
    s.identity.domain.value = static_cast<std::uint32_t>(parse_uint(cells[2], where));
    if (cells[3] == "-")
      s.flag = TruthFlag::none;
    else if (cells[3] == "D")
      s.flag = TruthFlag::duplicate;
    else if (cells[3] == "O")
      s.flag = TruthFlag::outlier;
    else
      fail(ErrorCode::format, where + ": flag must be -, D or O");
    s.signature.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) s.signature.push_back(parse_real(cells[4 + j], where));
    samples.push_back(std::move(s));
  }
  try {
    return FeatureStore(dim, std::move(samples));
  } catch (const Error& e) {
    fail(ErrorCode::format, origin + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out << content;
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

void save_features(const std::string& path, const FeatureStore& store) {
  std::ostringstream os;
  write_features(os, store);
  write_file(path, os.str());
}

FeatureStore load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open feature file '" + path + "'");
  return read_features(in, path);
}

namespace {

template <typename M>
void write_block(std::ostream& os, const std::string& name, const M& m) {
  os << '[' << name << ' ' << m.rows() << ' ' << m.cols() << "]\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_real(m(r, c));
    os << '\n';
  }
}

Eigen::MatrixXd read_block(std::istream& is, const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, const std::string& origin) {
  std::string line;
  if (!getline_checked(is, line)) fail(ErrorCode::format, origin + ": missing block " + name);
  const std::string expect = '[' + name + ' ' + std::to_string(rows) + ' ' + std::to_string(cols) + ']';
  if (line != expect)
    fail(ErrorCode::format, origin + ": expected block header '" + expect + "', got '" + line + "'");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!getline_checked(is, line)) fail(ErrorCode::format, origin + ": truncated block " + name);
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      fail(ErrorCode::format, origin + ": block " + name + " row has wrong width");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = parse_real(cells[static_cast<std::size_t>(c)], origin + " block " + name);
  }
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& os, const ModelState& model) {
  const ModelHyper& h = model.hyper;
  os << kCheckpointVersion << '\n'
     << "d_in=" << h.d_in << '\n'
     << "hidden=" << h.hidden << '\n'
     << "d_emb=" << h.d_emb << '\n'
     << "parts=" << h.parts << '\n'
     << "eps=" << format_real(h.eps) << '\n'
     << "bn_momentum=" << format_real(h.bn_momentum) << '\n'
     << "norm=" << (h.norm == NormMode::dsbn ? "dsbn" : "single") << '\n'
     << "classes=";
  const auto& blocks = model.classes.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << (i ? "," : "") << blocks[i].first.value << ':' << blocks[i].second;
  os << '\n';
  const Params& p = model.params;
  write_block(os, "w1", p.w1);
  write_block(os, "b1", p.b1);
  for (std::size_t k = 0; k < p.gamma.size(); ++k) write_block(os, "gamma." + std::to_string(k), p.gamma[k]);
  for (std::size_t k = 0; k < p.beta.size(); ++k) write_block(os, "beta." + std::to_string(k), p.beta[k]);
  write_block(os, "w2", p.w2);
  write_block(os, "b2", p.b2);
  for (std::size_t j = 0; j < p.head_w.size(); ++j) {
    write_block(os, "head_w." + std::to_string(j), p.head_w[j]);
    write_block(os, "head_b." + std::to_string(j), p.head_b[j]);
  }
  for (std::size_t k = 0; k < model.running_mean.size(); ++k)
    write_block(os, "running_mean." + std::to_string(k), model.running_mean[k]);
  for (std::size_t k = 0; k < model.running_var.size(); ++k)
    write_block(os, "running_var." + std::to_string(k), model.running_var[k]);
}

ModelState read_checkpoint(std::istream& is, const std::string& origin) {
  expect_version(is, kCheckpointVersion, origin);
  std::map<std::string, std::string> kv;
  const char* keys[] = {"d_in", "hidden", "d_emb", "parts", "eps", "bn_momentum", "norm", "classes"};
  for (const char* key : keys) {
    std::string line;
    if (!getline_checked(is, line)) fail(ErrorCode::format, origin + ": truncated header");
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key)
      fail(ErrorCode::format, origin + ": expected header key '" + key + "'");
    kv[key] = line.substr(eq + 1);
  }
  ModelState m;
  ModelHyper& h = m.hyper;
  h.d_in = parse_uint(kv["d_in"], origin);
  h.hidden = parse_uint(kv["hidden"], origin);
  h.d_emb = parse_uint(kv["d_emb"], origin);
  h.parts = parse_uint(kv["parts"], origin);
  h.eps = parse_real(kv["eps"], origin);
  h.bn_momentum = parse_real(kv["bn_momentum"], origin);
  if (kv["norm"] == "single")
    h.norm = NormMode::single;
  else if (kv["norm"] == "dsbn")
    h.norm = NormMode::dsbn;
  else
    fail(ErrorCode::format, origin + ": norm must be single or dsbn");
  if (h.parts == 0 || h.d_emb % h.parts != 0)
    fail(ErrorCode::format, origin + ": parts must divide d_emb");
  std::vector<std::pair<DomainId, std::size_t>> blocks;
  for (const std::string& item : split(kv["classes"], ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(ErrorCode::format, origin + ": bad classes entry");
    blocks.emplace_back(DomainId{static_cast<std::uint32_t>(parse_uint(item.substr(0, colon), origin))},
                        static_cast<std::size_t>(parse_uint(item.substr(colon + 1), origin)));
  }
  try {
    m.classes = ClassMap(std::move(blocks));
  } catch (const Error& e) {
    fail(ErrorCode::format, origin + ": " + e.what());
  }

  const auto hid = static_cast<Eigen::Index>(h.hidden);
  const auto emb = static_cast<Eigen::Index>(h.d_emb);
  const auto n_cls = static_cast<Eigen::Index>(m.n_classes());
  const auto seg = static_cast<Eigen::Index>(h.d_emb / h.parts);
  const std::size_t branches = h.norm == NormMode::dsbn ? m.classes.n_domains() : 1;
  Params& p = m.params;
  p.w1 = read_block(is, "w1", hid, static_cast<Eigen::Index>(h.d_in), origin);
  p.b1 = read_block(is, "b1", hid, 1, origin);
  for (std::size_t k = 0; k < branches; ++k) p.gamma.push_back(read_block(is, "gamma." + std::to_string(k), hid, 1, origin));
  for (std::size_t k = 0; k < branches; ++k) p.beta.push_back(read_block(is, "beta." + std::to_string(k), hid, 1, origin));
  p.w2 = read_block(is, "w2", emb, hid, origin);
  p.b2 = read_block(is, "b2", emb, 1, origin);
  for (std::size_t j = 0; j < h.parts; ++j) {
    p.head_w.push_back(read_block(is, "head_w." + std::to_string(j), n_cls, seg, origin));
    p.head_b.push_back(read_block(is, "head_b." + std::to_string(j), n_cls, 1, origin));
  }
  for (std::size_t k = 0; k < branches; ++k)
    m.running_mean.push_back(read_block(is, "running_mean." + std::to_string(k), hid, 1, origin));
  for (std::size_t k = 0; k < branches; ++k)
    m.running_var.push_back(read_block(is, "running_var." + std::to_string(k), hid, 1, origin));
  std::string rest;
  while (getline_checked(is, rest))
    if (!rest.empty()) fail(ErrorCode::format, origin + ": trailing content after last block");
  try {
    validate_model(m);
  } catch (const Error& e) {
    fail(ErrorCode::format, origin + ": " + e.what());
  }
  return m;
}

void save_checkpoint(const std::string& path, const ModelState& model) {
  std::ostringstream os;
  write_checkpoint(os, model);
  write_file(path, os.str());
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, path);
}

void write_distill_report(std::ostream& os, const DistillReport& r) {
  os << kDistillVersion << '\n'
     << "# mode=" << (r.policy.mode == DistillMode::redundancy ? "redundancy" : "noise")
     << " fraction=" << format_real(r.policy.removal_fraction) << " removed=" << r.removed_ids.size()
     << " shortfall=" << r.shortfall << " retained_digest=" << hex64(r.retained_store_digest) << '\n';
  for (const std::string& n : r.notices) os << "# notice: " << n << '\n';
  os << "sample_id,mean_dist,intra_dist,failure,removed\n";
  for (const SampleScores& s : r.scores) {
    const bool removed = std::binary_search(r.removed_ids.begin(), r.removed_ids.end(), s.sample_id);
    os << s.sample_id << ',' << (s.mean_dist ? format_real(*s.mean_dist) : "NA") << ','
       << format_real(s.intra_dist) << ',' << (s.failure ? 1 : 0) << ',' << (removed ? 1 : 0) << '\n';
  }
}

void write_run_report(std::ostream& os, const RunReport& r) {
  os << kRunReportVersion << '\n'
     << "# config_digest=" << hex64(r.config_digest) << '\n'
     << "record,step,key,value\n";
  for (const LossRecord& l : r.trace) {
    os << "loss," << l.step << ",lr," << format_real(l.lr) << '\n'
       << "loss," << l.step << ",total," << format_real(l.loss.total) << '\n'
       << "loss," << l.step << ",cross_entropy," << format_real(l.loss.cross_entropy) << '\n';
    if (l.loss.per_domain_triplet.empty())
      os << "loss," << l.step << ",triplet:naive," << format_real(l.loss.naive_triplet) << '\n';
    for (const auto& [d, v] : l.loss.per_domain_triplet)
      os << "loss," << l.step << ",triplet:d" << d.value << ',' << format_real(v) << '\n';
  }
  for (const EvalRecord& e : r.evals)
    os << "rank1," << e.step << ',' << e.name << ',' << format_real(e.rank1) << '\n';
}

void write_rank1_table(std::ostream& os, const std::vector<Rank1Row>& rows) {
  os << kRank1Version << '\n' << "protocol,gallery,probe,rank1\n";
  for (const Rank1Row& r : rows)
    os << r.protocol << ',' << r.gallery << ',' << r.probe << ',' << format_real(r.rank1) << '\n';
}

void write_affinity(std::ostream& os, const AffinityMatrix& m) {
  os << kAffinityVersion << '\n'
     << "# level=" << (m.level == AffinityLevel::low ? "low" : "high") << " similarity=cosine\n"
     << "domain";
  for (DomainId d : m.domains) os << ",d" << d.value;
  os << '\n';
  for (std::size_t i = 0; i < m.domains.size(); ++i) {
    os << 'd' << m.domains[i].value;
    for (std::size_t j = 0; j < m.domains.size(); ++j)
      os << ',' << format_real(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    os << '\n';
  }
}

void write_comparison(std::ostream& os, const ComparisonTable& t) {
  os << kComparisonVersion << '\n'
     << "# digest=" << hex64(t.digest) << '\n'
     << "variant,n_ok,self_mean,self_std,cross_mean,cross_std,train_fraction,errors\n";
  for (const ComparisonRow& r : t.rows) {
    std::string errors;
    for (const std::string& e : r.errors) errors += (errors.empty() ? "" : " | ") + e;
    std::replace(errors.begin(), errors.end(), ',', ';');
    os << r.variant << ',' << r.n_ok << ',' << format_real(r.self_mean) << ',' << format_real(r.self_std)
       << ',' << format_real(r.cross_mean) << ',' << format_real(r.cross_std) << ','
       << format_real(r.train_fraction) << ',' << errors << '\n';
  }
}

void write_comparison_cells(std::ostream& os, const ComparisonTable& t) {
  os << kComparisonVersion << '\n'
     << "# digest=" << hex64(t.digest) << '\n'
     << "variant,seed,self_rank1,self_rank1_average,cross_rank1,train_samples,full_samples,error\n";
  for (const ComparisonCell& c : t.cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << c.variant << ',' << c.seed << ',' << format_real(c.self_rank1) << ','
       << format_real(c.self_rank1_average) << ',' << format_real(c.cross_rank1) << ','
       << c.train_samples << ',' << c.full_samples << ',' << err << '\n';
  }
}

}  // namespace gaitmix
