#include "tmle/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tmle/numeric.hpp"

namespace tmle::harness {

namespace {

std::string num(double v) { return format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }

std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line + '\n';
}

std::string hex(std::uint64_t v) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string replicates_csv(const std::vector<ReplicateResult>& replicates) {
  std::string out = join({"replicate", "configuration", "status", "true_total", "point_estimate", "synthetic_term",
                          "correction_term", "error", "ht_estimate", "fallback_count", "leaf_count", "training_rows",
                          "sample_size", "r_squared", "internal_score", "external_score"});
  for (const auto& r : replicates) {
    if (!r.ok) {
      out += join({num(r.replicate), r.configuration, "failed", "", "", "", "", "", "", "", "", "", "", "", "", ""});
      continue;
    }
    out += join({num(r.replicate), r.configuration, "ok", num(r.true_total), num(r.estimate.point_estimate),
                 num(r.estimate.synthetic_term), num(r.estimate.correction_term), num(r.error()), num(r.ht_estimate),
                 num(r.estimate.fallback_count), num(r.leaf_count), num(r.training_rows), num(r.sample_size),
                 num(r.r_squared), num(r.internal.headline()), num(r.external.headline())});
  }
  return out;
}

std::string decomposition_csv(const DecompositionReport& report) {
  std::string out = join({"row_type", "key", "active_sources", "replicates", "mean_true_total", "mean_estimate", "bias",
                          "variance", "mse", "relative_bias", "mc_se", "bias_delta"});
  for (const auto& c : report.configurations) {
    out += join({"configuration", c.key, c.active, num(c.replicates), num(c.mean_true_total), num(c.mean_estimate),
                 num(c.bias), num(c.variance), num(c.mse), num(c.relative_bias), num(c.mc_se), ""});
  }
  for (const auto& a : report.attribution) {
    out += join({"attribution", a.source, "", "", "", "", "", "", "", "", "", num(a.bias_delta)});
  }
  return out;
}

std::string validity_csv(const ValidityReport& report) {
  std::string out = join({"configuration", "metric", "internal", "external", "gap"});
  for (const auto& row : report.rows) {
    const auto& in = row.internal;
    const auto& ex = row.external;
    auto rate = [&](const std::string& name, double a, double b) {
      out += join({row.configuration, name, num(a), num(b), num(a - b)});
    };
    auto count = [&](const std::string& name, double a, double b) {
      out += join({row.configuration, name, num(a), num(b), ""});
    };
    count("n", static_cast<double>(in.n), static_cast<double>(ex.n));
    if (report.task == Task::classification) {
      rate("accuracy", in.accuracy(), ex.accuracy());
      rate("precision", in.precision(), ex.precision());
      rate("recall", in.recall(), ex.recall());
      rate("f1", in.f1(), ex.f1());
      count("tp", in.tp, ex.tp);
      count("fp", in.fp, ex.fp);
      count("tn", in.tn, ex.tn);
      count("fn", in.fn, ex.fn);
    } else {
      rate("rmse", in.rmse(), ex.rmse());
      rate("mean_error", in.mean_error(), ex.mean_error());
    }
  }
  return out;
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::string out = join({"method", "true_pos", "est_pos", "bias", "accuracy"});
  for (const auto& r : rows) out += join({r.method, num(r.true_pos), num(r.est_pos), num(r.bias), num(r.accuracy)});
  return out;
}

std::string representativity_csv(const std::vector<RepresentativityRow>& rows) {
  std::string out = join({"configuration", "kind", "index", "count_a", "count_b", "distance", "covered"});
  for (const auto& row : rows) {
    const auto& rep = row.report;
    for (std::size_t j = 0; j < rep.marginal.size(); ++j) {
      const std::string index = j + 1 == rep.marginal.size() ? "target" : "x" + std::to_string(j);
      out += join({row.configuration, "marginal", index, "", "", num(rep.marginal[j]), ""});
    }
    for (const auto& cell : rep.cells) {
      std::string index;
      for (std::size_t k = 0; k < cell.coordinates.size(); ++k) {
        index += (k ? ":" : "") + std::to_string(cell.coordinates[k]);
      }
      out += join({row.configuration, "cell", index, num(cell.count_a), num(cell.count_b),
                   cell.covered ? num(cell.distance) : "", cell.covered ? "1" : "0"});
    }
    out += join({row.configuration, "summary", "undercoverage", "", "", num(rep.undercoverage), ""});
    out += join({row.configuration, "summary", "overcoverage", "", "", num(rep.overcoverage), ""});
    out += join({row.configuration, "summary", "max_distance", "", "", num(rep.max_distance), ""});
    out += join({row.configuration, "summary", "mean_distance", "", "", num(rep.mean_distance), ""});
  }
  return out;
}

std::string run_manifest(const ScenarioConfig& config) {
  std::ostringstream out;
  out << "tool = tmle\n";
  out << "version = " << kVersion << "\n";
  out << "schema_version = " << kSchemaVersion << "\n";
  out << "config_hash = " << hex(config_hash(config)) << "\n";
  out << "seed = " << config.seed << "\n";
  out << "replicates = " << config.replicates << "\n";
  out << "task = " << to_string(config.population.task) << "\n";
  out << "estimator_mode = " << to_string(config.mode) << "\n";
  out << "enabled_sources = " << config.toggles.label() << "\n";
  out << "note = population families are linear, piecewise_constant and logistic_threshold score models; "
         "classification thresholds a latent score\n";
  out << "note = processing errors and construct-validity errors are outside the simulated error sources\n";
  out << "note = conditional representativity is measured within feature cells, a surrogate for F(Y|X)\n";
  out << "files = replicates.csv decomposition.csv validity.csv table1.csv representativity.csv\n";
  return out.str();
}

void emit_reports(const RunResult& result, const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir.string() + "'");
  }
  write_file(out_dir / "replicates.csv", replicates_csv(result.replicates));
  write_file(out_dir / "decomposition.csv", decomposition_csv(result.decomposition));
  write_file(out_dir / "validity.csv", validity_csv(result.validity));
  write_file(out_dir / "table1.csv", table1_csv(result.table1));
  write_file(out_dir / "representativity.csv", representativity_csv(result.representativity));
  write_file(out_dir / "run_manifest.txt", run_manifest(config));
}

}  // namespace tmle::harness
