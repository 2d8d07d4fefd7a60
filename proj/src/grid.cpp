#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "abibench/harness.hpp"

namespace abibench::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return std::string(buf);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

struct Cell {
  std::size_t scenario_idx = 0;
  std::size_t method_idx = 0;
  std::size_t seed_idx = 0;
  TrainConfig config;
  std::string hash;
};

struct CellResult {
  std::optional<metrics::MetricsReport> report;
  std::string error;
  bool trained = false;
};

// Runs one cell, reusing a completed run directory when its record matches.
CellResult run_cell(const Cell& cell, const std::filesystem::path& dir) {
  CellResult result;
  try {
    std::filesystem::create_directories(dir);
    bool have_record = false;
    if (std::filesystem::exists(dir / "record.json")) {
      try {
        have_record = load_record(dir).hash == cell.hash;
      } catch (const std::exception&) {
        have_record = false;
      }
    }
    if (!have_record) {
      train(cell.config, dir);
      result.trained = true;
    }
    if (!result.trained && std::filesystem::exists(dir / "metrics.json")) {
      std::ifstream in(dir / "metrics.json");
      result.report = metrics::report_from_json(json::parse(in));
    } else {
      result.report = evaluate(dir, cell.config.scenario, cell.config.eval);
      write_file(dir / "metrics.json",
                 metrics::report_to_json(*result.report).dump(2) + "\n");
    }
    std::error_code ec;
    std::filesystem::remove(dir / "error.txt", ec);
  } catch (const std::exception& e) {
    result.report.reset();
    result.error = e.what();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(dir / "error.txt", std::ios::trunc);
    out << e.what() << "\n";
  }
  return result;
}

}  // namespace

GridResult run_grid(const GridManifest& manifest, const std::filesystem::path& out_dir,
                    int workers) {
  if (workers < 1) throw ConfigError("grid workers must be at least 1");
  if (manifest.scenarios.empty() || manifest.methods.empty() || manifest.seeds.empty())
    throw ConfigError("grid manifest has no cells");

  std::vector<Cell> cells;
  for (std::size_t si = 0; si < manifest.scenarios.size(); ++si)
    for (std::size_t mi = 0; mi < manifest.methods.size(); ++mi)
      for (std::size_t ki = 0; ki < manifest.seeds.size(); ++ki) {
        Cell c;
        c.scenario_idx = si;
        c.method_idx = mi;
        c.seed_idx = ki;
        c.config = cell_config(manifest, manifest.scenarios[si], manifest.methods[mi],
                               manifest.seeds[ki]);
        c.hash = config_hash(c.config);
        cells.push_back(std::move(c));
      }

  // Duplicate manifest entries collapse onto one run directory; only the
  // first occurrence does the work.
  std::vector<std::size_t> owner(cells.size());
  {
    std::map<std::string, std::size_t> first;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto [it, inserted] = first.emplace(cells[i].hash, i);
      owner[i] = it->second;
    }
  }

  std::filesystem::create_directories(out_dir / "cells");
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      if (owner[i] != i) continue;
      results[i] = run_cell(cells[i], out_dir / "cells" / cells[i].hash);
    }
  };
  const int n_threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (owner[i] != i) results[i] = results[owner[i]];

  GridResult summary;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (owner[i] != i) continue;
    if (!results[i].report) {
      ++summary.failed;
      std::fprintf(stderr, "grid cell %s failed: %s\n", cells[i].hash.c_str(),
                   results[i].error.c_str());
    } else if (results[i].trained) {
      ++summary.trained;
    } else {
      ++summary.reused;
    }
  }

  // Raw per-seed rows in deterministic cell order.
  std::string cells_csv = metrics::csv_header() + "\n";
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (results[i].report) cells_csv += metrics::csv_rows(*results[i].report);
  write_file(out_dir / "cells.csv", cells_csv);

  // Mean and standard deviation across seeds per (scenario, method, metric).
  struct AggRow {
    std::string scenario;
    std::string method;
    double lambda = 0.0;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;
  };
  std::vector<AggRow> agg;
  for (std::size_t si = 0; si < manifest.scenarios.size(); ++si) {
    for (std::size_t mi = 0; mi < manifest.methods.size(); ++mi) {
      std::vector<const metrics::MetricsReport*> group;
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].scenario_idx == si && cells[i].method_idx == mi && results[i].report)
          group.push_back(&*results[i].report);
      if (group.empty()) continue;
      for (const auto& [metric, first_value] : group.front()->values) {
        std::vector<double> vals;
        vals.reserve(group.size());
        for (const metrics::MetricsReport* r : group)
          if (r->has(metric)) vals.push_back(r->value(metric));
        AggRow row;
        row.scenario = manifest.scenarios[si].name();
        row.method = manifest.methods[mi].label();
        row.lambda = manifest.methods[mi].lambda;
        row.metric = metric;
        row.n = static_cast<int>(vals.size());
        row.mean = metrics::sorted_mean(vals);
        if (vals.size() > 1) {
          double ss = 0.0;
          for (double v : vals) ss += (v - row.mean) * (v - row.mean);
          row.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
        }
        agg.push_back(std::move(row));
      }
    }
  }

  std::string agg_csv = "scenario,method,lambda,metric,mean,sd,n_seeds\n";
  json agg_json = json::array();
  for (const AggRow& row : agg) {
    agg_csv += row.scenario + "," + row.method + "," + fmt(row.lambda) + "," + row.metric + "," +
               fmt(row.mean) + "," + fmt(row.sd) + "," + std::to_string(row.n) + "\n";
    agg_json.push_back({{"scenario", row.scenario},
                        {"method", row.method},
                        {"lambda", row.lambda},
                        {"metric", row.metric},
                        {"mean", row.mean},
                        {"sd", row.sd},
                        {"n_seeds", row.n}});
  }
  write_file(out_dir / "aggregate.csv", agg_csv);
  write_file(out_dir / "aggregate.json", agg_json.dump(2) + "\n");

  // Radar companion: per scenario and metric, means normalized by the
  // largest-magnitude method so the extreme method maps to +-1.
  json radar = json::object();
  for (const AggRow& row : agg) {
    radar[row.scenario][row.metric][row.method] = row.mean;
  }
  for (auto& [scenario, metrics_obj] : radar.items()) {
    for (auto& [metric, methods_obj] : metrics_obj.items()) {
      double denom = 0.0;
      for (const auto& [method, value] : methods_obj.items())
        denom = std::max(denom, std::abs(value.get<double>()));
      for (auto& [method, value] : methods_obj.items())
        value = denom > 0.0 ? value.get<double>() / denom : 0.0;
    }
  }
  write_file(out_dir / "radar.json", radar.dump(2) + "\n");
  return summary;
}

}  // namespace abibench::harness
