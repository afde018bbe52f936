#include "fusionkit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace fusionkit {

namespace {

using detail::format_double;
using detail::join;
using detail::split;
using detail::trim;

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected an integer");
  return out;
}

double parse_f64(const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw std::invalid_argument("expected a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false");
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
  bool optional = false;  // omitted from the echo when unset
};

template <class T>
Field size_field(const std::string& key, T& ref) {
  return {key, [&ref](const std::string& v) { ref = static_cast<T>(parse_u64(v)); },
          [&ref] { return std::to_string(ref); }};
}

Field double_field(const std::string& key, double& ref) {
  return {key, [&ref](const std::string& v) { ref = parse_f64(v); }, [&ref] { return format_double(ref); }};
}

Field bool_field(const std::string& key, bool& ref) {
  return {key, [&ref](const std::string& v) { ref = parse_bool(v); }, [&ref] { return ref ? "true" : "false"; }};
}

std::vector<Field> encoder_fields(EncoderSpec& e) {
  return {
      {"model_id",
       [&e](const std::string& v) {
         if (v.empty() || v.find_first_of("+,; \t") != std::string::npos) {
           throw std::invalid_argument("model ids must be nonempty and free of '+', ',', ';' and spaces");
         }
         e.model_id = v;
       },
       [&e] { return e.model_id; }},
      size_field("seed", e.seed),
      size_field("layers", e.layers),
      size_field("dim", e.dim),
      size_field("framerate_hz", e.framerate_hz),
      {"specialization", [&e](const std::string& v) { e.specialization = parse_specialization(v); },
       [&e] { return std::string(to_string(e.specialization)); }},
      {"taps",
       [&e](const std::string& v) {
         e.taps.clear();
         if (v.empty()) return;
         for (const auto& t : split(v, ',')) e.taps.push_back(parse_u64(t));
       },
       [&e] { return join(e.taps, ","); }},
      size_field("tap_width", e.tap_width),
  };
}

std::vector<Field> interface_fields(InterfaceConfig& c, DimRule& dim_rule) {
  return {
      {"kind", [&c](const std::string& v) { c.kind = parse_interface_kind(v); },
       [&c] { return std::string(to_string(c.kind)); }},
      size_field("output_dim", c.output_dim),
      size_field("hconv_kernel", c.hconv_kernel),
      size_field("hconv_stride", c.hconv_stride),
      size_field("hconv_channels", c.hconv_channels),
      double_field("gumbel_tau", c.gumbel_tau),
      bool_field("gumbel_hard_train", c.gumbel_hard_train),
      bool_field("gumbel_hard_eval", c.gumbel_hard_eval),
      {"dim_rule", [&dim_rule](const std::string& v) { dim_rule = parse_dim_rule(v); },
       [&dim_rule] { return std::string(to_string(dim_rule)); }},
  };
}

std::vector<Field> task_fields(TaskSpec& t) {
  return {
      {"kind", [&t](const std::string& v) { t.kind = parse_task_kind(v); },
       [&t] { return std::string(to_string(t.kind)); }},
      size_field("n_items", t.n_items),
      size_field("input_len", t.input_len),
      size_field("features", t.features),
      size_field("input_rate_hz", t.input_rate_hz),
      {"data_seed", [&t](const std::string& v) { t.data_seed = parse_u64(v); },
       [&t] { return t.data_seed ? std::to_string(*t.data_seed) : std::string(); }, true},
      double_field("noise", t.noise),
      double_field("distractor", t.distractor),
      double_field("bit_prior", t.bit_prior),
      size_field("vocab_size", t.vocab_size),
      size_field("symbol_width", t.symbol_width),
      size_field("segment_frames", t.segment_frames),
      size_field("gap_frames", t.gap_frames),
      size_field("speakers", t.speakers),
      double_field("channel", t.channel),
      size_field("embed_dim", t.embed_dim),
  };
}

std::vector<Field> train_fields(TrainSettings& s) {
  return {
      size_field("steps", s.steps),
      size_field("batch_size", s.batch_size),
      double_field("lr", s.adam.lr),
      double_field("beta1", s.adam.beta1),
      double_field("beta2", s.adam.beta2),
      double_field("eps", s.adam.eps),
      size_field("eval_every", s.eval_every),
      size_field("log_every", s.log_every),
      size_field("seed", s.seed),
      size_field("debug_nan_step", s.debug_nan_step),
  };
}

std::vector<Field> grid_fields(GridSpec& g) {
  return {
      {"interfaces",
       [&g](const std::string& v) {
         g.interfaces.clear();
         if (v.empty()) return;
         for (const auto& k : split(v, ',')) g.interfaces.push_back(parse_interface_kind(k));
       },
       [&g] {
         std::vector<std::string> names;
         for (auto k : g.interfaces) names.emplace_back(to_string(k));
         return join(names, ",");
       }},
      {"combos",
       [&g](const std::string& v) {
         g.combos.clear();
         if (v.empty()) return;
         for (const auto& c : split(v, ';')) {
           if (c.empty()) throw std::invalid_argument("empty combo");
           g.combos.push_back(split(c, '+'));
         }
       },
       [&g] {
         std::vector<std::string> names;
         for (const auto& c : g.combos) names.push_back(join(c, "+"));
         return join(names, ";");
       }},
      {"seeds",
       [&g](const std::string& v) {
         g.seeds.clear();
         if (v.empty()) return;
         for (const auto& s : split(v, ',')) g.seeds.push_back(parse_u64(s));
       },
       [&g] { return join(g.seeds, ","); }},
      size_field("jobs", g.jobs),
  };
}

void emit_section(std::ostringstream& os, const std::string& name, const std::vector<Field>& fields) {
  os << '[' << name << "]\n";
  for (const auto& f : fields) {
    const std::string v = f.get();
    if (f.optional && v.empty()) continue;
    os << f.key << (v.empty() ? " =" : " = ") << v << '\n';
  }
}

std::string emit_experiment(const ExperimentConfig& const_cfg, const std::optional<GridSpec>& const_grid) {
  // The field tables bind by reference; work on copies.
  ExperimentConfig cfg = const_cfg;
  std::ostringstream os;
  for (std::size_t i = 0; i < cfg.encoders.size(); ++i) {
    emit_section(os, "encoder." + std::to_string(i), encoder_fields(cfg.encoders[i]));
    os << '\n';
  }
  emit_section(os, "interface", interface_fields(cfg.interface, cfg.dim_rule));
  os << '\n';
  emit_section(os, "task", task_fields(cfg.task));
  os << '\n';
  emit_section(os, "train", train_fields(cfg.train));
  if (const_grid) {
    GridSpec g = *const_grid;
    os << '\n';
    emit_section(os, "grid", grid_fields(g));
  }
  return os.str();
}

}  // namespace

ConfigFile parse_config(std::string_view text) {
  ConfigFile out;
  out.experiment.interface.output_dim = 0;
  std::map<std::size_t, EncoderSpec> encoders;
  std::map<std::size_t, std::size_t> encoder_lines;
  GridSpec grid;
  bool has_grid = false;

  std::string section;
  std::vector<Field> fields;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string line(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header '" + line + "'", line_no);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      seen.clear();
      if (section.rfind("encoder.", 0) == 0) {
        std::size_t idx = 0;
        try {
          idx = parse_u64(section.substr(8));
        } catch (const std::invalid_argument&) {
          throw ConfigError("bad encoder section '[" + section + "]'", line_no);
        }
        if (encoders.count(idx)) throw ConfigError("duplicate section [" + section + "]", line_no);
        encoders[idx] = EncoderSpec{};
        encoders[idx].model_id = "m" + std::to_string(idx);
        encoder_lines[idx] = line_no;
        fields = encoder_fields(encoders[idx]);
      } else if (section == "interface") {
        fields = interface_fields(out.experiment.interface, out.experiment.dim_rule);
      } else if (section == "task") {
        fields = task_fields(out.experiment.task);
      } else if (section == "train") {
        fields = train_fields(out.experiment.train);
      } else if (section == "grid") {
        has_grid = true;
        fields = grid_fields(grid);
      } else {
        throw ConfigError("unknown section [" + section + "]", line_no);
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside of any section", line_no);
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
    try {
      it->set(value);
    } catch (const std::exception& e) {
      throw ConfigError("invalid value '" + value + "' for " + key + ": " + e.what(), line_no);
    }
  }

  std::size_t expected = 0;
  for (auto& [idx, spec] : encoders) {
    if (idx != expected++) {
      throw ConfigError("encoder sections must be numbered 0, 1, 2, ...", encoder_lines[idx]);
    }
    out.experiment.encoders.push_back(spec);
  }
  std::set<std::string> ids;
  for (const auto& e : out.experiment.encoders) {
    if (!ids.insert(e.model_id).second) throw ConfigError("duplicate model_id '" + e.model_id + "'");
  }
  if (out.experiment.encoders.empty()) throw ConfigError("config defines no [encoder.N] section");
  if (out.experiment.train.steps == 0) throw ConfigError("train.steps must be positive");
  if (out.experiment.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (has_grid) {
    if (grid.interfaces.empty() || grid.combos.empty()) {
      throw ConfigError("[grid] needs at least one interface and one combo");
    }
    if (grid.seeds.empty()) grid.seeds.push_back(out.experiment.train.seed);
    if (grid.jobs == 0) throw ConfigError("grid.jobs must be positive");
    for (const auto& combo : grid.combos)
      for (const auto& id : combo)
        if (!ids.count(id)) throw ConfigError("grid combo names unknown model_id '" + id + "'");
    out.grid = grid;
  }
  return out;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ConfigFile& cfg) { return emit_experiment(cfg.experiment, cfg.grid); }

std::string emit_config(const ExperimentConfig& cfg) { return emit_experiment(cfg, std::nullopt); }

std::string config_digest(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a64(emit_config(cfg))));
  return buf;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const GridSpec& grid) {
  std::vector<ExperimentConfig> out;
  for (const auto& combo : grid.combos) {
    std::vector<EncoderSpec> encoders;
    for (const auto& id : combo) {
      auto it = std::find_if(base.encoders.begin(), base.encoders.end(),
                             [&](const EncoderSpec& e) { return e.model_id == id; });
      if (it == base.encoders.end()) throw ConfigError("grid combo names unknown model_id '" + id + "'");
      encoders.push_back(*it);
    }
    for (auto kind : grid.interfaces)
      for (auto seed : grid.seeds) {
        ExperimentConfig cfg = base;
        cfg.encoders = encoders;
        cfg.interface.kind = kind;
        cfg.train.seed = seed;
        out.push_back(std::move(cfg));
      }
  }
  return out;
}

}  // namespace fusionkit
