// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "flowinv/errors.hpp"

namespace flowinv::cli {
namespace {

using nlohmann::json;

const char* type_name(const json& j) { return j.type_name(); }

// One JSON object of the config. Every key read through it is remembered so
// finish() can reject the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError(describe() + " must be an object, got " + type_name(node_));
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  Section section(const std::string& key) {
    static const json kEmpty = json::object();
    const json* j = find(key);
    return Section(j ? *j : kEmpty, child(key));
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* j = find(key);
    if (!j) return fallback;
    if (!j->is_string()) throw wrong_type(key, "a string", *j);
    return j->get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* j = find(key);
    if (!j) return fallback;
    if (!j->is_boolean()) throw wrong_type(key, "true or false", *j);
    return j->get<bool>();
  }

  double number(const std::string& key, double fallback) {
    const json* j = find(key);
    return j ? as_number(*j, child(key)) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    const json* j = find(key);
    if (!j || j->is_null()) return std::nullopt;
    return as_number(*j, child(key));
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* j = find(key);
    return j ? as_count(*j, child(key)) : fallback;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + child(key) + "'");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static double as_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError("'" + where + "' must be a number, got " + type_name(j));
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError("'" + where + "' must be finite");
    return v;
  }

  static std::uint64_t as_count(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) {
      throw ConfigError("'" + where + "' must be a non-negative integer, got " + j.dump());
    }
    return j.get<std::uint64_t>();
  }

 private:
  std::string describe() const { return path_.empty() ? "config root" : "'" + path_ + "'"; }

  ConfigError wrong_type(const std::string& key, const char* expected, const json& got) const {
    return ConfigError("'" + child(key) + "' must be " + expected + ", got " + type_name(got));
  }

  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  std::filesystem::path p(text);
  return p.is_relative() ? (base / p).lexically_normal() : p;
}

template <class Enum, std::size_t N>
Enum pick(const std::string& where, const std::string& text, const std::pair<const char*, Enum> (&options)[N]) {
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("'" + where + "' = \"" + text + "\" is not one of: " + allowed);
}

constexpr std::pair<const char*, FieldKind> kFieldKinds[] = {
    {"analytic", FieldKind::Analytic}, {"mlp", FieldKind::Mlp}, {"attention", FieldKind::Attention}};
constexpr std::pair<const char*, SourceKind> kSourceKinds[] = {{"two_moons", SourceKind::TwoMoons},
                                                              {"gaussian", SourceKind::Gaussian}};
constexpr std::pair<const char*, int> kMoons[] = {{"upper", 0}, {"lower", 1}, {"any", -1}};
constexpr std::pair<const char*, MaskKind> kMaskKinds[] = {{"none", MaskKind::None},
                                                          {"ones", MaskKind::Ones},
                                                          {"zeros", MaskKind::Zeros},
                                                          {"file", MaskKind::File},
                                                          {"build", MaskKind::Build}};
constexpr std::pair<const char*, EditAlgorithm> kAlgorithms[] = {
    {"direct", EditAlgorithm::Direct}, {"virtual", EditAlgorithm::Virtual}, {"mvg", EditAlgorithm::Mvg}};
constexpr std::pair<const char*, Inverter> kInverters[] = {{"euler", Inverter::Euler},
                                                          {"midpoint", Inverter::Midpoint},
                                                          {"fixed_point", Inverter::FixedPoint},
                                                          {"dna", Inverter::Dna}};
constexpr std::pair<const char*, ReconstructionStrategy> kStrategies[] = {
    {"Vanilla", ReconstructionStrategy::Vanilla},
    {"StepwiseCorrection", ReconstructionStrategy::StepwiseCorrection},
    {"DirectAligned", ReconstructionStrategy::DirectAligned},
    {"DirectAlignedCached", ReconstructionStrategy::DirectAlignedCached}};

template <class Enum, std::size_t N>
const char* name_of(Enum value, const std::pair<const char*, Enum> (&options)[N]) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "?";
}

void parse_field(Section s, FieldSpec& f, const std::filesystem::path& base) {
  f.kind = pick(s.child("kind"), s.string("kind", "mlp"), kFieldKinds);
  switch (f.kind) {
    case FieldKind::Analytic: {
      if (const json* mean = s.find("mean")) {
        if (!mean->is_array() || mean->empty()) throw ConfigError("'field.mean' must be a non-empty array");
        f.analytic.mean.clear();
        for (const json& v : *mean) f.analytic.mean.push_back(Section::as_number(v, "field.mean[]"));
      }
      f.analytic.std = s.number("std", f.analytic.std);
      if (!(f.analytic.std > 0.0)) throw ConfigError("'field.std' must be > 0");
      break;
    }
    case FieldKind::Mlp: {
      f.mlp.hidden = s.count("hidden", f.mlp.hidden);
      f.mlp.condition_dim = s.count("condition_dim", f.mlp.condition_dim);
      if (f.mlp.hidden == 0) throw ConfigError("'field.hidden' must be > 0");
      const std::string ckpt = s.string("checkpoint", "");
      if (!ckpt.empty()) f.checkpoint = resolve(base, ckpt);
      Section t = s.section("training");
      f.training.steps = t.count("steps", f.training.steps);
      f.training.batch = t.count("batch", f.training.batch);
      f.training.lr = t.number("lr", f.training.lr);
      f.training.condition_dropout = t.number("condition_dropout", f.training.condition_dropout);
      if (f.training.condition_dropout < 0.0 || f.training.condition_dropout > 1.0) {
        throw ConfigError("'field.training.condition_dropout' must lie in [0, 1]");
      }
      t.finish();
      break;
    }
    case FieldKind::Attention:
      f.attention.channels = s.count("channels", f.attention.channels);
      f.attention.model_dim = s.count("model_dim", f.attention.model_dim);
      f.attention.condition_dim = s.count("condition_dim", f.attention.condition_dim);
      f.attention.init_seed = s.count("init_seed", f.attention.init_seed);
      break;
  }
  s.finish();
}

void parse_source(Section s, SourceSpec& src) {
  src.kind = pick(s.child("kind"), s.string("kind", "two_moons"), kSourceKinds);
  if (src.kind == SourceKind::TwoMoons) {
    src.points = s.count("points", src.points);
    src.moon = pick(s.child("moon"), s.string("moon", "upper"), kMoons);
    if (src.points == 0) throw ConfigError("'source.points' must be > 0");
  } else {
    if (const json* shape = s.find("shape")) {
      if (!shape->is_array() || shape->size() != 3) throw ConfigError("'source.shape' must be [channels, height, width]");
      src.shape.clear();
      for (const json& v : *shape) src.shape.push_back(Section::as_count(v, "source.shape[]"));
    }
    for (std::size_t d : src.shape) {
      if (d == 0) throw ConfigError("'source.shape' entries must be > 0");
    }
    src.scale = s.number("scale", src.scale);
  }
  s.finish();
}

std::optional<std::size_t> parse_condition(Section& s, const std::string& key, std::optional<std::size_t> fallback) {
  const json* j = s.find(key);
  if (!j) return fallback;
  if (j->is_null()) return std::nullopt;
  return Section::as_count(*j, s.child(key));
}

void parse_mask(Section s, MaskSpec& m, const std::filesystem::path& base) {
  m.kind = pick(s.child("kind"), s.string("kind", "none"), kMaskKinds);
  if (m.kind == MaskKind::File) {
    const std::string path = s.string("path", "");
    if (path.empty()) throw ConfigError("'edit.mask.path' is required for a file mask");
    m.path = resolve(base, path);
  } else if (m.kind == MaskKind::Build) {
    m.type = parse_edit_type(s.string("type", "local"));
    const json* box = s.find("bbox");
    if (!box || !box->is_array() || box->size() != 4) {
      throw ConfigError("'edit.mask.bbox' must be [x1, y1, x2, y2]");
    }
    long c[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(*box)[i].is_number_integer()) throw ConfigError("'edit.mask.bbox' entries must be integers");
      c[i] = (*box)[i].get<long>();
    }
    m.box = BBox::from_corners({c[0], c[1]}, {c[2], c[3]});
    m.tau = s.number("tau", m.tau);
    m.channel = s.count("channel", m.channel);
    m.dilation = s.count("dilation", m.dilation);
    if (m.dilation % 2 == 0) throw ConfigError("'edit.mask.dilation' must be odd");
  }
  s.finish();
}

void parse_edit(Section s, EditSpec& e, const std::filesystem::path& base) {
  e.algorithm = pick(s.child("algorithm"), s.string("algorithm", "direct"), kAlgorithms);
  e.t_inj = s.count("t_inj", e.t_inj);
  e.injection = s.boolean("injection", e.injection);
  e.blending = s.boolean("blending", e.blending);
  e.alignment = parse_alignment_mode(s.string("alignment", to_string(e.alignment)));
  e.eta = s.optional_number("eta");
  if (e.algorithm == EditAlgorithm::Mvg && !e.eta) {
    throw ConfigError("'edit.eta' is required when edit.algorithm is mvg");
  }
  if (e.eta && (*e.eta < 0.0 || *e.eta > 1.0)) throw ConfigError("'edit.eta' must lie in [0, 1]");
  parse_mask(s.section("mask"), e.mask, base);
  s.finish();
}

json mask_json(const MaskSpec& m) {
  json j{{"kind", name_of(m.kind, kMaskKinds)}};
  if (m.kind == MaskKind::File) j["path"] = m.path.string();
  if (m.kind == MaskKind::Build) {
    j["type"] = to_string(m.type);
    j["bbox"] = {m.box.x1, m.box.y1, m.box.x2, m.box.y2};
    j["tau"] = m.tau;
    j["channel"] = m.channel;
    j["dilation"] = m.dilation;
  }
  return j;
}

json condition_json(const std::optional<std::size_t>& c) { return c ? json(*c) : json(nullptr); }

}  // namespace

const char* to_string(Inverter inverter) { return name_of(inverter, kInverters); }
const char* to_string(EditAlgorithm algorithm) { return name_of(algorithm, kAlgorithms); }

ReconstructionStrategy parse_strategy(const std::string& text) {
  return pick("reconstruction.strategies[]", text, kStrategies);
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Section root(doc, "");
  cfg.seed = root.count("seed", cfg.seed);
  if (root.has("output_dir")) cfg.output_dir = root.string("output_dir", "");

  parse_field(root.section("field"), cfg.field, base_dir);

  Section grid = root.section("grid");
  cfg.steps = grid.count("steps", cfg.steps);
  const std::string schedule = grid.string("schedule", "uniform");
  if (schedule == "shifted") {
    cfg.schedule = Schedule::shifted(grid.number("shift", 3.0));
  } else if (schedule != "uniform") {
    throw ConfigError("'grid.schedule' = \"" + schedule + "\" is not one of: uniform, shifted");
  }
  grid.finish();
  make_time_grid(cfg.steps, cfg.schedule);

  parse_source(root.section("source"), cfg.source);

  const bool conditioned = cfg.field.kind != FieldKind::Analytic;
  Section conds = root.section("conditions");
  cfg.cond_src = parse_condition(conds, "source", conditioned ? cfg.cond_src : std::nullopt);
  cfg.cond_tar = parse_condition(conds, "target", conditioned ? cfg.cond_tar : std::nullopt);
  conds.finish();
  if (!conditioned && (cfg.cond_src || cfg.cond_tar)) {
    throw ConfigError("the analytic field takes no conditions; set conditions.source/target to null");
  }

  Section guidance = root.section("guidance");
  cfg.cfg_inv = guidance.number("cfg_inv", cfg.cfg_inv);
  cfg.cfg_edit = guidance.number("cfg_edit", cfg.cfg_edit);
  guidance.finish();
  if (cfg.cfg_inv < 0.0 || cfg.cfg_edit < 0.0) throw ConfigError("guidance scales must be >= 0");

  Section inversion = root.section("inversion");
  cfg.inverter = pick(inversion.child("method"), inversion.string("method", "euler"), kInverters);
  cfg.iterations = inversion.count("iterations", cfg.iterations);
  if (cfg.iterations == 0) throw ConfigError("'inversion.iterations' must be > 0");
  inversion.finish();

  Section recon = root.section("reconstruction");
  if (const json* list = recon.find("strategies")) {
    if (!list->is_array() || list->empty()) throw ConfigError("'reconstruction.strategies' must be a non-empty array");
    cfg.strategies.clear();
    for (const json& item : *list) {
      if (!item.is_string()) throw ConfigError("'reconstruction.strategies' entries must be strings");
      cfg.strategies.push_back(parse_strategy(item.get<std::string>()));
    }
  }
  recon.finish();

  parse_edit(root.section("edit"), cfg.edit, base_dir);

  Section compare = root.section("compare");
  cfg.compare_iterations = compare.count("fixed_point_iterations", cfg.compare_iterations);
  if (cfg.compare_iterations == 0) throw ConfigError("'compare.fixed_point_iterations' must be > 0");
  compare.finish();

  Section report = root.section("report");
  const std::string input = report.string("input_dir", "");
  if (!input.empty()) cfg.report_input = resolve(base_dir, input);
  report.finish();

  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json field{{"kind", name_of(c.field.kind, kFieldKinds)}};
  switch (c.field.kind) {
    case FieldKind::Analytic:
      field["mean"] = c.field.analytic.mean;
      field["std"] = c.field.analytic.std;
      break;
    case FieldKind::Mlp:
      field["hidden"] = c.field.mlp.hidden;
      field["condition_dim"] = c.field.mlp.condition_dim;
      if (c.field.checkpoint) field["checkpoint"] = c.field.checkpoint->string();
      field["training"] = {{"steps", c.field.training.steps},
                           {"batch", c.field.training.batch},
                           {"lr", c.field.training.lr},
                           {"condition_dropout", c.field.training.condition_dropout}};
      break;
    case FieldKind::Attention:
      field["channels"] = c.field.attention.channels;
      field["model_dim"] = c.field.attention.model_dim;
      field["condition_dim"] = c.field.attention.condition_dim;
      field["init_seed"] = c.field.attention.init_seed;
      break;
  }

  json grid{{"steps", c.steps}, {"schedule", c.schedule.kind == ScheduleKind::Shifted ? "shifted" : "uniform"}};
  if (c.schedule.kind == ScheduleKind::Shifted) grid["shift"] = c.schedule.shift;

  json source{{"kind", name_of(c.source.kind, kSourceKinds)}};
  if (c.source.kind == SourceKind::TwoMoons) {
    source["points"] = c.source.points;
    source["moon"] = name_of(c.source.moon, kMoons);
  } else {
    source["shape"] = c.source.shape;
    source["scale"] = c.source.scale;
  }

  json strategies = json::array();
  for (ReconstructionStrategy s : c.strategies) strategies.push_back(to_string(s));

  json edit{{"algorithm", to_string(c.edit.algorithm)},
            {"t_inj", c.edit.t_inj},
            {"injection", c.edit.injection},
            {"blending", c.edit.blending},
            {"alignment", to_string(c.edit.alignment)},
            {"eta", c.edit.eta ? json(*c.edit.eta) : json(nullptr)},
            {"mask", mask_json(c.edit.mask)}};

  json out{{"seed", c.seed},
           {"output_dir", c.output_dir.string()},
           {"field", field},
           {"grid", grid},
           {"source", source},
           {"conditions", {{"source", condition_json(c.cond_src)}, {"target", condition_json(c.cond_tar)}}},
           {"guidance", {{"cfg_inv", c.cfg_inv}, {"cfg_edit", c.cfg_edit}}},
           {"inversion", {{"method", to_string(c.inverter)}, {"iterations", c.iterations}}},
           {"reconstruction", {{"strategies", strategies}}},
           {"edit", edit},
           {"compare", {{"fixed_point_iterations", c.compare_iterations}}}};
  if (!c.report_input.empty()) out["report"] = {{"input_dir", c.report_input.string()}};
  return out;
}

}  // namespace flowinv::cli
