#include "padt/ablate.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "padt/errors.hpp"
#include "padt/eval.hpp"
#include "padt/train.hpp"

namespace padt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::vector<AblationCell> default_ablation_cells(const RunConfig& base) {
  std::vector<AblationCell> cells;
  auto push = [&](const std::string& name, int n_vrt, bool robust, bool fvp) {
    AblationCell cell;
    cell.name = name;
    cell.cfg = base;
    cell.cfg.n_vrt = n_vrt;
    cell.cfg.robust_mask = robust;
    cell.cfg.model.use_fvp = fvp;
    cell.cfg.out_dir.clear();
    cells.push_back(std::move(cell));
  };
  push("nvrt1", 1, true, true);
  push("nvrt3", 3, true, true);
  push("nvrt5", 5, true, true);
  push("nvrt8", 8, true, true);
  push("all_vrts", kAllVrts, true, true);
  push("no_robust_mask", 5, false, true);
  push("no_fvp", 5, true, false);
  return cells;
}

namespace {

double metric_of(const json& m, const char* key) {
  return m.contains(key) ? m[key].get<double>() : 0.0;
}

std::string svg_chart(const std::vector<AblationRow>& rows,
                      const char* metric) {
  const int bar_w = 64, gap = 18, h = 260, base_y = 210, left = 50;
  const int w = left + static_cast<int>(rows.size()) * (bar_w + gap) + 20;
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='"
    << h << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  for (int g = 0; g <= 4; ++g) {
    const double v = g / 4.0;
    const int y = base_y - static_cast<int>(v * 180);
    s << "<line x1='" << left - 6 << "' y1='" << y << "' x2='" << w - 10
      << "' y2='" << y << "' stroke='#ddd'/>\n";
    s << "<text x='8' y='" << y + 4 << "' font-size='11' fill='#444'>"
      << std::fixed << std::setprecision(2) << v << "</text>\n";
  }
  int x = left;
  for (const auto& row : rows) {
    const double v = metric_of(row.metrics, metric);
    const int bh = static_cast<int>(v * 180);
    s << "<rect x='" << x << "' y='" << base_y - bh << "' width='" << bar_w
      << "' height='" << bh << "' fill='#4472c4'/>\n";
    s << "<text x='" << x + bar_w / 2 << "' y='" << base_y - bh - 6
      << "' font-size='11' text-anchor='middle' fill='#222'>" << std::fixed
      << std::setprecision(3) << v << "</text>\n";
    s << "<text x='" << x + bar_w / 2 << "' y='" << base_y + 16
      << "' font-size='11' text-anchor='middle' fill='#222'>" << row.name
      << "</text>\n";
    x += bar_w + gap;
  }
  s << "<text x='" << left << "' y='" << h - 8
    << "' font-size='12' fill='#222'>" << metric << " by cell</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& cells,
                                      const std::string& out_dir,
                                      std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    RunConfig cfg = cell.cfg;
    if (!out_dir.empty())
      cfg.out_dir = (fs::path(out_dir) / "cells" / cell.name).string();
    if (progress)
      (*progress) << "[ablate] cell " << cell.name << " (n_vrt=" << cfg.n_vrt
                  << " robust=" << cfg.robust_mask
                  << " fvp=" << cfg.model.use_fvp << ")\n"
                  << std::flush;
    PadtModel model(cfg.model, cfg.seed);
    train_run(model, cfg, progress);
    const EvalResult ev = eval_run(model, cfg, cfg.eval_scenes);
    AblationRow row;
    row.name = cell.name;
    row.n_vrt = cfg.n_vrt;
    row.robust_mask = cfg.robust_mask;
    row.use_fvp = cfg.model.use_fvp;
    row.metrics = ev.metrics;
    if (progress)
      (*progress) << "[ablate] " << cell.name << " -> " << row.metrics.dump()
                  << "\n"
                  << std::flush;
    rows.push_back(std::move(row));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json report = json::array();
    for (const auto& row : rows) {
      json r;
      r["name"] = row.name;
      r["n_vrt"] = row.n_vrt;
      r["robust_mask"] = row.robust_mask;
      r["use_fvp"] = row.use_fvp;
      r["metrics"] = row.metrics;
      report.push_back(std::move(r));
    }
    std::ofstream(fs::path(out_dir) / "ablation.json")
        << report.dump(2) << "\n";

    std::ofstream csv(fs::path(out_dir) / "ablation.csv");
    csv << "name,n_vrt,robust_mask,use_fvp,acc50,acc75,mean_iou\n";
    for (const auto& row : rows)
      csv << row.name << "," << row.n_vrt << "," << row.robust_mask << ","
          << row.use_fvp << "," << metric_of(row.metrics, "acc50") << ","
          << metric_of(row.metrics, "acc75") << ","
          << metric_of(row.metrics, "mean_iou") << "\n";

    std::ofstream md(fs::path(out_dir) / "ablation.md");
    md << "| cell | n_vrt | robust mask | f_vp | acc@0.5 | acc@0.75 | mean "
          "IoU |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows)
      md << "| " << row.name << " | "
         << (row.n_vrt == kAllVrts ? std::string("all")
                                   : std::to_string(row.n_vrt))
         << " | " << (row.robust_mask ? "on" : "off") << " | "
         << (row.use_fvp ? "on" : "off") << " | " << std::fixed
         << std::setprecision(3) << metric_of(row.metrics, "acc50") << " | "
         << metric_of(row.metrics, "acc75") << " | "
         << metric_of(row.metrics, "mean_iou") << " |\n";

    std::ofstream(fs::path(out_dir) / "ablation_acc50.svg")
        << svg_chart(rows, "acc50");
  }
  return rows;
}

}  // namespace padt
