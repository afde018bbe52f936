#include "fusionkit/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "text_util.hpp"

namespace fusionkit {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string section_title(std::size_t n_models) {
  return n_models == 1 ? "Single Model" : std::to_string(n_models) + " Model Fusion";
}

bool better(const std::string& metric, double a, double b) { return lower_is_better(metric) ? a < b : a > b; }

}  // namespace

std::vector<GridRow> aggregate(const std::vector<RunResult>& runs) {
  std::map<std::tuple<std::size_t, std::string, int>, GridRow> cells;
  for (const auto& r : runs) {
    const auto& test = r.report(Split::test);
    auto& row = cells[{r.n_models, r.combo, static_cast<int>(r.interface_kind)}];
    row.combo = r.combo;
    row.n_models = r.n_models;
    row.interface_kind = r.interface_kind;
    row.metric = test.metric;
    row.param_count = r.param_count;
    row.mean += test.value;
    ++row.n_seeds;
  }
  std::vector<GridRow> rows;
  for (auto& [key, row] : cells) {
    row.mean /= static_cast<double>(row.n_seeds);
    rows.push_back(row);
  }
  return rows;
}

std::vector<FusionGain> fusion_gain(const std::vector<GridRow>& rows) {
  std::vector<FusionGain> gains;
  for (const auto& fused : rows) {
    if (fused.n_models < 2) continue;
    FusionGain g;
    g.combo = fused.combo;
    g.interface_kind = fused.interface_kind;
    g.fusion_value = fused.mean;
    bool found_any = false;
    for (const auto& id : detail::split(fused.combo, '+')) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const GridRow& r) {
        return r.n_models == 1 && r.combo == id && r.interface_kind == fused.interface_kind;
      });
      if (it == rows.end()) {
        throw std::invalid_argument("fusion_gain: no single-model run of " + id + " with " +
                                    to_string(fused.interface_kind) + " for fusion " + fused.combo);
      }
      if (!found_any || better(fused.metric, it->mean, g.single_value)) {
        g.single_value = it->mean;
        g.best_single = id;
        found_any = true;
      }
    }
    const double diff = lower_is_better(fused.metric) ? g.single_value - g.fusion_value : g.fusion_value - g.single_value;
    g.gain_percent = diff == 0.0 ? 0.0 : 100.0 * diff / std::max(std::abs(g.single_value), 1e-12);
    gains.push_back(g);
  }
  return gains;
}

std::string render_markdown(const std::vector<GridRow>& rows, const std::vector<FusionGain>& gains) {
  std::ostringstream os;
  if (rows.empty()) return "";
  const std::string& metric = rows.front().metric;
  double overall = rows.front().mean;
  for (const auto& r : rows)
    if (better(metric, r.mean, overall)) overall = r.mean;

  std::size_t i = 0;
  while (i < rows.size()) {
    const std::size_t n = rows[i].n_models;
    std::size_t j = i;
    double best = rows[i].mean;
    for (; j < rows.size() && rows[j].n_models == n; ++j)
      if (better(metric, rows[j].mean, best)) best = rows[j].mean;
    if (i) os << '\n';
    os << "## " << section_title(n) << "\n\n";
    os << "| Upstream | Interface | Params | Seeds | " << metric << " |\n";
    os << "| --- | --- | ---: | ---: | ---: |\n";
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = rows[k];
      std::string v = fmt("%.4f", r.mean);
      if (r.mean == best) v = "<u>" + v + "</u>";
      if (r.mean == overall) v = "**" + v + "**";
      os << "| " << r.combo << " | " << to_string(r.interface_kind) << " | " << r.param_count << " | " << r.n_seeds
         << " | " << v << " |\n";
    }
    i = j;
  }
  if (!gains.empty()) {
    os << "\n## Fusion Gain\n\n";
    os << "| Fusion | Interface | Best single | Single " << metric << " | Fusion " << metric << " | Gain (%) |\n";
    os << "| --- | --- | --- | ---: | ---: | ---: |\n";
    for (const auto& g : gains) {
      os << "| " << g.combo << " | " << to_string(g.interface_kind) << " | " << g.best_single << " | "
         << fmt("%.4f", g.single_value) << " | " << fmt("%.4f", g.fusion_value) << " | "
         << fmt("%+.2f", g.gain_percent) << " |\n";
    }
  }
  return os.str();
}

std::string render_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "combo,n_models,interface,metric,value,n_seeds,params\n";
  for (const auto& r : rows) {
    os << r.combo << ',' << r.n_models << ',' << to_string(r.interface_kind) << ',' << r.metric << ','
       << fmt("%.10g", r.mean) << ',' << r.n_seeds << ',' << r.param_count << '\n';
  }
  return os.str();
}

GridReport run_grid(const std::vector<ExperimentConfig>& configs, std::size_t jobs, const GridProgress& progress) {
  GridReport rep;
  rep.runs.resize(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        rep.runs[i] = train(configs[i]);
        std::lock_guard lock(mu);
        ++done;
        if (progress) progress(done, configs.size(), rep.runs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(configs.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  rep.rows = aggregate(rep.runs);
  bool complete = true;
  for (const auto& r : rep.rows) {
    if (r.n_models < 2) continue;
    for (const auto& id : detail::split(r.combo, '+')) {
      complete = complete && std::any_of(rep.rows.begin(), rep.rows.end(), [&](const GridRow& s) {
                   return s.n_models == 1 && s.combo == id && s.interface_kind == r.interface_kind;
                 });
    }
  }
  if (complete) rep.gains = fusion_gain(rep.rows);
  rep.markdown = render_markdown(rep.rows, rep.gains);
  rep.csv = render_csv(rep.rows);
  return rep;
}

}  // namespace fusionkit
