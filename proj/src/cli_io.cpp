#include "genpath/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "genpath/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace genpath {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kCsvStamp = "# format: genpath-csv/1";

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw InputError(where + ": expected a number, got '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw InputError(where + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Line-oriented CSV scanner: skips blanks and '#' comments, splits on commas,
// and labels every complaint with file and line number.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw InputError("cannot open " + path);
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      fields.clear();
      std::size_t start = 0;
      for (;;) {
        const std::size_t comma = t.find(',', start);
        fields.push_back(trim(t.substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return true;
    }
    return false;
  }

  std::string where() const { return path_ + " line " + std::to_string(lineno_); }

  void expect_header(const std::vector<std::string>& names) {
    std::vector<std::string> fields;
    if (!next(fields)) throw InputError(path_ + ": empty file, expected a header");
    if (fields != names) {
      std::string want;
      for (std::size_t i = 0; i < names.size(); ++i)
        want += (i ? "," : "") + names[i];
      throw InputError(where() + ": expected header '" + want + "'");
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
  Eigen::Index lineno_ = 0;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& err) {
    throw InputError(path + ": " + err.what());
  }
}

double json_real(const json& v, const std::string& where) {
  if (!v.is_string()) throw InputError(where + ": expected a %.17g string");
  return parse_real(v.get<std::string>(), where);
}

struct NormalSolveMap : PrimalMap {
  DesignMatrix x;
  explicit NormalSolveMap(DesignMatrix x_) : x(std::move(x_)) {}
  Eigen::VectorXd primal(const Eigen::VectorXd& y, const SparseRowMat& d,
                         const Eigen::VectorXd& u) const override {
    return x.normal_solve(x.matrix().transpose() * y - d.transpose() * u);
  }
};

struct PinvSolveMap : PrimalMap {
  DesignMatrix x;
  explicit PinvSolveMap(DesignMatrix x_) : x(std::move(x_)) {}
  Eigen::VectorXd primal(const Eigen::VectorXd& y, const SparseRowMat& d,
                         const Eigen::VectorXd& u) const override {
    return x.pinv_apply(y - d.transpose() * u);
  }
};

void reject_flag(const RunConfig& config, bool given, const char* flag) {
  if (given) {
    throw InputError("flag " + std::string(flag) + " is not used by problem '" +
                     config.problem + "'");
  }
}

void require_flag(const RunConfig& config, bool given, const char* flag) {
  if (!given) {
    throw InputError("problem '" + config.problem + "' requires " +
                     std::string(flag));
  }
}

}  // namespace

Eigen::VectorXd load_vector_csv(const std::string& path) {
  CsvReader in(path);
  in.expect_header({"y"});
  std::vector<double> values;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    if (fields.size() != 1) throw InputError(in.where() + ": expected one column");
    values.push_back(parse_real(fields[0], in.where()));
  }
  if (values.empty()) throw InputError(path + ": no observations");
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  CsvReader in(path);
  std::vector<std::string> fields;
  if (!in.next(fields)) throw InputError(path + ": empty file, expected a header");
  const std::size_t cols = fields.size();
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (in.next(fields)) {
    if (fields.size() != cols) {
      throw InputError(in.where() + ": expected " + std::to_string(cols) +
                       " columns, got " + std::to_string(fields.size()));
    }
    for (const std::string& f : fields) values.push_back(parse_real(f, in.where()));
    ++rows;
  }
  if (rows == 0) throw InputError(path + ": no data rows");
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(cols); ++j)
      x(i, j) = values[static_cast<std::size_t>(i * static_cast<Eigen::Index>(cols) + j)];
  return x;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> load_edges_csv(
    const std::string& path) {
  CsvReader in(path);
  in.expect_header({"i", "j"});
  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    if (fields.size() != 2) throw InputError(in.where() + ": expected two columns");
    const long i = parse_int(fields[0], in.where());
    const long j = parse_int(fields[1], in.where());
    if (i < 1 || j < 1) throw InputError(in.where() + ": node indices are 1-based");
    edges.emplace_back(i - 1, j - 1);
  }
  return edges;
}

SparseRowMat load_triplets_csv(const std::string& path, Eigen::Index cols) {
  CsvReader in(path);
  in.expect_header({"row", "col", "value"});
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::Index max_row = 0;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    if (fields.size() != 3) throw InputError(in.where() + ": expected three columns");
    const long r = parse_int(fields[0], in.where());
    const long c = parse_int(fields[1], in.where());
    const double v = parse_real(fields[2], in.where());
    if (r < 1 || c < 1) throw InputError(in.where() + ": indices are 1-based");
    if (c > cols) {
      throw InputError(in.where() + ": column " + std::to_string(c) +
                       " exceeds the coefficient count " + std::to_string(cols));
    }
    entries.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
    max_row = std::max<Eigen::Index>(max_row, r);
  }
  if (entries.empty()) throw InputError(path + ": no entries");
  SparseRowMat d(max_row, cols);
  d.setFromTriplets(entries.begin(), entries.end());
  d.makeCompressed();
  return d;
}

ProblemData assemble_problem(const RunConfig& config) {
  ProblemData prob;
  if (config.y.empty()) throw InputError("--y is required");
  prob.y = load_vector_csv(config.y);
  if (!config.x.empty()) {
    prob.x.emplace(load_matrix_csv(config.x));
    if (prob.y.size() != prob.x->rows()) {
      throw InputError("y has " + std::to_string(prob.y.size()) +
                       " observations but the design has " +
                       std::to_string(prob.x->rows()) + " rows");
    }
  }
  const Eigen::Index p = prob.x ? prob.x->cols() : prob.y.size();

  const bool has_order = config.order >= 0;
  const bool has_alpha = config.alpha != 0.0;
  const bool has_edges = !config.edges.empty();
  const bool has_d = !config.d.empty();

  if (config.problem == "fl1d") {
    reject_flag(config, has_order, "--order");
    reject_flag(config, has_alpha, "--alpha");
    reject_flag(config, has_edges, "--edges");
    reject_flag(config, has_d, "--d");
    prob.spec = PenaltySpec::trend_filter(p, 0);
  } else if (config.problem == "tf") {
    require_flag(config, has_order, "--order");
    reject_flag(config, has_alpha, "--alpha");
    reject_flag(config, has_edges, "--edges");
    reject_flag(config, has_d, "--d");
    prob.spec = PenaltySpec::trend_filter(p, config.order);
  } else if (config.problem == "flgraph") {
    require_flag(config, has_edges, "--edges");
    reject_flag(config, has_order, "--order");
    reject_flag(config, has_alpha, "--alpha");
    reject_flag(config, has_d, "--d");
    prob.spec = PenaltySpec::fused_graph(p, load_edges_csv(config.edges));
  } else if (config.problem == "sfl") {
    require_flag(config, has_edges, "--edges");
    require_flag(config, has_alpha, "--alpha");
    reject_flag(config, has_order, "--order");
    reject_flag(config, has_d, "--d");
    prob.spec =
        PenaltySpec::sparse_fused_graph(p, load_edges_csv(config.edges), config.alpha);
  } else if (config.problem == "custom") {
    require_flag(config, has_d, "--d");
    reject_flag(config, has_order, "--order");
    reject_flag(config, has_alpha, "--alpha");
    reject_flag(config, has_edges, "--edges");
    prob.spec = PenaltySpec::custom_rows(load_triplets_csv(config.d, p));
  } else {
    throw InputError("unknown problem '" + config.problem +
                     "' (expected fl1d, flgraph, sfl, tf, or custom)");
  }
  return prob;
}

SolutionPath run_configured_path(const ProblemData& prob, const PathOptions& opt) {
  if (prob.x) return run_path_design(prob.y, *prob.x, prob.spec, opt);
  return run_path(prob.y, prob.spec, opt);
}

namespace {

const char* primal_tag(const ProblemData& prob) {
  if (!prob.x) return "identity";
  return prob.spec.kind == PenaltyKind::Custom ? "pinv" : "normal";
}

void write_knots(const std::string& dir, const std::string& format,
                 const std::vector<PathKnot>& knots) {
  if (format == "csv") {
    std::ofstream out = open_out(dir + "/knots.csv");
    out << kCsvStamp << "\n";
    out << "lambda,event,coord,sign,df\n";
    for (const PathKnot& k : knots) {
      const Eigen::Index coord = k.event == PathEventKind::Terminal ? 0 : k.coord + 1;
      out << fmt_real(k.lambda) << ',' << to_string(k.event) << ',' << coord << ','
          << k.sign << ',' << k.df << "\n";
    }
    return;
  }
  json rows = json::array();
  for (const PathKnot& k : knots) {
    rows.push_back({{"lambda", fmt_real(k.lambda)},
                    {"event", to_string(k.event)},
                    {"coord", k.event == PathEventKind::Terminal ? 0 : k.coord + 1},
                    {"sign", k.sign},
                    {"df", k.df}});
  }
  open_out(dir + "/knots.json") << json{{"format_version", kFormatVersion},
                                        {"knots", rows}}
                                       .dump(1)
                                << "\n";
}

void write_segments(const std::string& dir, const std::string& format,
                    const std::vector<DualSegment>& segments) {
  if (format == "csv") {
    std::ofstream out = open_out(dir + "/segments.csv");
    out << kCsvStamp << "\n";
    out << "segment,lambda_hi,lambda_lo,df,coord,a,b\n";
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const DualSegment& seg = segments[s];
      for (Eigen::Index i = 0; i < seg.a.size(); ++i) {
        out << s + 1 << ',' << fmt_real(seg.lambda_hi) << ','
            << fmt_real(seg.lambda_lo) << ',' << seg.df << ',' << i + 1 << ','
            << fmt_real(seg.a[i]) << ',' << fmt_real(seg.b[i]) << "\n";
      }
    }
    return;
  }
  json rows = json::array();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const DualSegment& seg = segments[s];
    for (Eigen::Index i = 0; i < seg.a.size(); ++i) {
      rows.push_back({{"segment", s + 1},
                      {"lambda_hi", fmt_real(seg.lambda_hi)},
                      {"lambda_lo", fmt_real(seg.lambda_lo)},
                      {"df", seg.df},
                      {"coord", i + 1},
                      {"a", fmt_real(seg.a[i])},
                      {"b", fmt_real(seg.b[i])}});
    }
  }
  open_out(dir + "/segments.json") << json{{"format_version", kFormatVersion},
                                           {"segments", rows}}
                                          .dump(1)
                                   << "\n";
}

json sparse_entries(const SparseRowMat& d) {
  json entries = json::array();
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (SparseRowMat::InnerIterator it(d, r); it; ++it) {
      entries.push_back({r + 1, it.col() + 1, fmt_real(it.value())});
    }
  }
  return entries;
}

SparseRowMat sparse_from_entries(const json& shape, const json& entries,
                                 const std::string& where) {
  const Eigen::Index rows = shape.at(0).get<Eigen::Index>();
  const Eigen::Index cols = shape.at(1).get<Eigen::Index>();
  std::vector<Eigen::Triplet<double>> trip;
  for (const json& e : entries) {
    trip.emplace_back(static_cast<int>(e.at(0).get<Eigen::Index>() - 1),
                      static_cast<int>(e.at(1).get<Eigen::Index>() - 1),
                      json_real(e.at(2), where));
  }
  SparseRowMat d(rows, cols);
  d.setFromTriplets(trip.begin(), trip.end());
  d.makeCompressed();
  return d;
}

std::vector<PathKnot> read_knots(const std::string& dir, const std::string& format) {
  std::vector<PathKnot> knots;
  auto from_fields = [](double lambda, const std::string& event, Eigen::Index coord,
                        int sign, Eigen::Index df, const std::string& where) {
    PathKnot k;
    k.lambda = lambda;
    if (event == "hit") {
      k.event = PathEventKind::Hit;
    } else if (event == "leave") {
      k.event = PathEventKind::Leave;
    } else if (event == "end") {
      k.event = PathEventKind::Terminal;
    } else {
      throw InputError(where + ": unknown event '" + event + "'");
    }
    k.coord = k.event == PathEventKind::Terminal ? 0 : coord - 1;
    if (k.event != PathEventKind::Terminal && coord < 1) {
      throw InputError(where + ": coordinates are 1-based");
    }
    k.sign = sign;
    k.df = df;
    return k;
  };

  if (format == "csv") {
    CsvReader in(dir + "/knots.csv");
    in.expect_header({"lambda", "event", "coord", "sign", "df"});
    std::vector<std::string> f;
    while (in.next(f)) {
      if (f.size() != 5) throw InputError(in.where() + ": expected five columns");
      knots.push_back(from_fields(parse_real(f[0], in.where()), f[1],
                                  parse_int(f[2], in.where()),
                                  static_cast<int>(parse_int(f[3], in.where())),
                                  parse_int(f[4], in.where()), in.where()));
    }
    return knots;
  }
  const std::string file = dir + "/knots.json";
  const json doc = load_json_file(file);
  for (const json& r : doc.at("knots")) {
    knots.push_back(from_fields(json_real(r.at("lambda"), file),
                                r.at("event").get<std::string>(),
                                r.at("coord").get<Eigen::Index>(),
                                r.at("sign").get<int>(),
                                r.at("df").get<Eigen::Index>(), file));
  }
  return knots;
}

std::vector<DualSegment> read_segments(const std::string& dir,
                                       const std::string& format, Eigen::Index m) {
  std::vector<DualSegment> segments;
  Eigen::Index expect_coord = 1;
  auto add_row = [&](Eigen::Index seg_index, double hi, double lo, Eigen::Index df,
                     Eigen::Index coord, double a, double b, const std::string& where) {
    if (seg_index == static_cast<Eigen::Index>(segments.size()) + 1 &&
        expect_coord == m + 1) {
      expect_coord = 1;
    }
    if (seg_index == static_cast<Eigen::Index>(segments.size()) && expect_coord <= m) {
      // continuing the current segment
    } else if (seg_index == static_cast<Eigen::Index>(segments.size()) + 1 &&
               expect_coord == 1) {
      DualSegment seg;
      seg.lambda_hi = hi;
      seg.lambda_lo = lo;
      seg.df = df;
      seg.a = Eigen::VectorXd::Zero(m);
      seg.b = Eigen::VectorXd::Zero(m);
      segments.push_back(std::move(seg));
    } else {
      throw InputError(where + ": segments out of order");
    }
    if (coord != expect_coord) {
      throw InputError(where + ": expected coordinate " +
                       std::to_string(expect_coord));
    }
    segments.back().a[coord - 1] = a;
    segments.back().b[coord - 1] = b;
    ++expect_coord;
  };

  if (format == "csv") {
    CsvReader in(dir + "/segments.csv");
    in.expect_header({"segment", "lambda_hi", "lambda_lo", "df", "coord", "a", "b"});
    std::vector<std::string> f;
    while (in.next(f)) {
      if (f.size() != 7) throw InputError(in.where() + ": expected seven columns");
      add_row(parse_int(f[0], in.where()), parse_real(f[1], in.where()),
              parse_real(f[2], in.where()), parse_int(f[3], in.where()),
              parse_int(f[4], in.where()), parse_real(f[5], in.where()),
              parse_real(f[6], in.where()), in.where());
    }
  } else {
    const std::string file = dir + "/segments.json";
    const json doc = load_json_file(file);
    for (const json& r : doc.at("segments")) {
      add_row(r.at("segment").get<Eigen::Index>(), json_real(r.at("lambda_hi"), file),
              json_real(r.at("lambda_lo"), file), r.at("df").get<Eigen::Index>(),
              r.at("coord").get<Eigen::Index>(), json_real(r.at("a"), file),
              json_real(r.at("b"), file), file);
    }
  }
  if (!segments.empty() && expect_coord != m + 1) {
    throw InputError(dir + ": last segment is incomplete");
  }
  return segments;
}

TerminationReason termination_from(const std::string& name, const std::string& where) {
  if (name == "lambda_zero") return TerminationReason::LambdaZero;
  if (name == "max_steps") return TerminationReason::MaxSteps;
  if (name == "min_lambda") return TerminationReason::MinLambda;
  if (name == "max_df") return TerminationReason::MaxDf;
  if (name == "aborted") return TerminationReason::Aborted;
  throw InputError(where + ": unknown termination '" + name + "'");
}

}  // namespace

void write_path_artifact(const std::string& dir, const RunConfig& config,
                         const ProblemData& prob, const SolutionPath& path) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir + ": " + ec.message());

  write_knots(dir, config.format, path.knots());
  write_segments(dir, config.format, path.segments());

  const PathData& raw = path.raw();
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["data_format"] = config.format;

  json problem;
  problem["name"] = config.problem;
  problem["p"] = prob.spec.p;
  problem["order"] = prob.spec.order;
  problem["alpha"] = fmt_real(prob.spec.alpha);
  json edges = json::array();
  for (const auto& e : prob.spec.edges)
    edges.push_back({e.first + 1, e.second + 1});
  problem["edges"] = edges;
  if (prob.spec.kind == PenaltyKind::Custom) {
    problem["d_shape"] = {prob.spec.custom.rows(), prob.spec.custom.cols()};
    problem["d"] = sparse_entries(prob.spec.custom);
  }
  meta["problem"] = problem;

  json yv = json::array();
  for (Eigen::Index i = 0; i < raw.y.size(); ++i) yv.push_back(fmt_real(raw.y[i]));
  meta["y"] = yv;

  meta["primal"] = primal_tag(prob);
  if (prob.x) {
    json xr = json::array();
    for (Eigen::Index i = 0; i < prob.x->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < prob.x->cols(); ++j)
        row.push_back(fmt_real(prob.x->matrix()(i, j)));
      xr.push_back(std::move(row));
    }
    meta["x"] = std::move(xr);
  }
  if (std::string(primal_tag(prob)) == "pinv") {
    meta["ambient_d_shape"] = {raw.d.rows(), raw.d.cols()};
    meta["ambient_d"] = sparse_entries(raw.d);
  }

  meta["stop"] = {{"max_steps", config.max_steps},
                  {"min_lambda", fmt_real(config.min_lambda)},
                  {"max_df", config.max_df}};
  meta["result"] = {{"termination", to_string(path.termination())},
                    {"failure", path.failure()},
                    {"initial_df", path.initial_df()},
                    {"lambda_min", fmt_real(path.lambda_min())},
                    {"has_segments", path.has_segments()}};

  open_out(dir + "/meta.json") << meta.dump(1) << "\n";
}

SolutionPath load_path_artifact(const std::string& dir) {
  const std::string meta_file = dir + "/meta.json";
  const json meta = load_json_file(meta_file);
  try {
    const std::string format = meta.at("data_format").get<std::string>();
    const json& problem = meta.at("problem");
    const std::string name = problem.at("name").get<std::string>();
    const Eigen::Index p = problem.at("p").get<Eigen::Index>();

    std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
    for (const json& e : problem.at("edges"))
      edges.emplace_back(e.at(0).get<Eigen::Index>() - 1,
                         e.at(1).get<Eigen::Index>() - 1);

    PenaltySpec spec;
    if (name == "fl1d") {
      spec = PenaltySpec::trend_filter(p, 0);
    } else if (name == "tf") {
      spec = PenaltySpec::trend_filter(p, problem.at("order").get<int>());
    } else if (name == "flgraph") {
      spec = PenaltySpec::fused_graph(p, std::move(edges));
    } else if (name == "sfl") {
      spec = PenaltySpec::sparse_fused_graph(
          p, std::move(edges), json_real(problem.at("alpha"), meta_file));
    } else if (name == "custom") {
      spec = PenaltySpec::custom_rows(sparse_from_entries(
          problem.at("d_shape"), problem.at("d"), meta_file));
    } else {
      throw InputError(meta_file + ": unknown problem '" + name + "'");
    }

    PathData data;
    const json& yv = meta.at("y");
    data.y.resize(static_cast<Eigen::Index>(yv.size()));
    for (Eigen::Index i = 0; i < data.y.size(); ++i)
      data.y[i] = json_real(yv.at(static_cast<std::size_t>(i)), meta_file);

    const std::string primal = meta.at("primal").get<std::string>();
    if (primal == "pinv") {
      data.d = sparse_from_entries(meta.at("ambient_d_shape"), meta.at("ambient_d"),
                                   meta_file);
    } else {
      data.d = spec.matrix();
    }

    if (primal != "identity") {
      const json& xr = meta.at("x");
      const Eigen::Index n = static_cast<Eigen::Index>(xr.size());
      Eigen::MatrixXd x(n, p);
      for (Eigen::Index i = 0; i < n; ++i) {
        const json& row = xr.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != p)
          throw InputError(meta_file + ": ragged design matrix");
        for (Eigen::Index j = 0; j < p; ++j)
          x(i, j) = json_real(row.at(static_cast<std::size_t>(j)), meta_file);
      }
      if (primal == "normal") {
        data.primal_map = std::make_shared<NormalSolveMap>(DesignMatrix(x));
      } else if (primal == "pinv") {
        data.primal_map = std::make_shared<PinvSolveMap>(DesignMatrix(x));
      } else {
        throw InputError(meta_file + ": unknown primal map '" + primal + "'");
      }
    }

    data.knots = read_knots(dir, format);
    data.segments = read_segments(dir, format, data.d.rows());

    const json& result = meta.at("result");
    data.has_segments = result.at("has_segments").get<bool>();
    data.initial_df = result.at("initial_df").get<Eigen::Index>();
    data.lambda_min = json_real(result.at("lambda_min"), meta_file);
    data.termination =
        termination_from(result.at("termination").get<std::string>(), meta_file);
    data.failure = result.at("failure").get<std::string>();

    // A penalty with no rows has one segment and nothing to store per
    // coordinate, so the segment files come back empty; rebuild it.
    if (data.has_segments && data.d.rows() == 0 && data.segments.empty()) {
      DualSegment whole;
      whole.lambda_hi = std::numeric_limits<double>::infinity();
      whole.lambda_lo = data.lambda_min;
      whole.df = data.initial_df;
      data.segments.push_back(std::move(whole));
    }
    return SolutionPath(std::move(data));
  } catch (const json::exception& err) {
    throw InputError(meta_file + ": " + err.what());
  }
}

double lambda_for_df(const SolutionPath& path, Eigen::Index df) {
  for (const DualSegment& seg : path.segments()) {
    if (seg.df == df) return seg.lambda_lo;
  }
  std::set<Eigen::Index> achievable;
  for (const DualSegment& seg : path.segments()) achievable.insert(seg.df);
  std::string listing;
  for (Eigen::Index v : achievable) {
    if (!listing.empty()) listing += ", ";
    listing += std::to_string(v);
  }
  throw RangeError("no segment on the path has df = " + std::to_string(df) +
                   "; achievable df: " + (listing.empty() ? "none" : listing));
}

void write_coef_file(const std::string& file, const std::string& format,
                     const Eigen::VectorXd& beta) {
  if (format == "csv") {
    std::ofstream out = open_out(file);
    out << kCsvStamp << "\n";
    out << "coord,beta\n";
    for (Eigen::Index i = 0; i < beta.size(); ++i)
      out << i + 1 << ',' << fmt_real(beta[i]) << "\n";
    return;
  }
  json rows = json::array();
  for (Eigen::Index i = 0; i < beta.size(); ++i)
    rows.push_back({{"coord", i + 1}, {"beta", fmt_real(beta[i])}});
  open_out(file) << json{{"format_version", kFormatVersion}, {"coef", rows}}.dump(1)
                 << "\n";
}

Eigen::VectorXd bench_signal(const std::string& problem, Eigen::Index n,
                             unsigned seed) {
  if (n < 4) throw InputError("benchmark sizes must be at least 4");
  std::mt19937 rng(seed + static_cast<unsigned>(n));
  // Box-Muller over the raw mt19937 stream: std::normal_distribution is not
  // pinned across standard libraries, and these inputs must be reproducible.
  auto gauss = [&rng]() {
    const double u1 = (static_cast<double>(rng()) + 0.5) / 4294967296.0;
    const double u2 = (static_cast<double>(rng()) + 0.5) / 4294967296.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };

  if (problem == "fl2d") {
    const Eigen::Index side = static_cast<Eigen::Index>(std::sqrt(double(n)));
    Eigen::VectorXd y(side * side);
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) {
        const double mean = (3 * r >= 2 * side && 3 * c < side) ? 1.0 : 0.0;
        y[r * side + c] = mean + 0.2 * gauss();
      }
    }
    return y;
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = std::sin(4.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)) +
           0.2 * gauss();
  }
  return y;
}

PenaltySpec bench_penalty(const std::string& problem, int order, Eigen::Index n) {
  if (problem == "fl1d") return PenaltySpec::trend_filter(n, 0);
  if (problem == "tf") return PenaltySpec::trend_filter(n, order);
  if (problem == "fl2d") {
    const Eigen::Index side = static_cast<Eigen::Index>(std::sqrt(double(n)));
    std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) {
        const Eigen::Index v = r * side + c;
        if (c + 1 < side) edges.emplace_back(v, v + 1);
        if (r + 1 < side) edges.emplace_back(v, v + side);
      }
    }
    return PenaltySpec::fused_graph(side * side, std::move(edges));
  }
  throw InputError("unknown benchmark problem '" + problem +
                   "' (expected fl1d, tf, or fl2d)");
}

BenchTable run_bench(const std::string& problem, int order,
                     const std::vector<Eigen::Index>& sizes, Eigen::Index steps,
                     unsigned seed, int repeats) {
  if (sizes.empty()) throw InputError("need at least one size");
  if (steps < 1) throw InputError("steps must be positive");
  if (repeats < 1) throw InputError("repeats must be positive");
  if (problem == "tf" && order < 0) throw InputError("tf benchmarks require --order");
  if (problem != "tf" && order >= 0)
    throw InputError("--order only applies to tf benchmarks");

  BenchTable table;
  for (Eigen::Index n : sizes) {
    const Eigen::VectorXd y = bench_signal(problem, n, seed);
    const PenaltySpec spec = bench_penalty(problem, order, n);
    PathOptions opt;
    opt.stop.max_steps = steps;
    opt.record_segments = false;

    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run_path(y, spec, opt);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    table.points.push_back({y.size(), best});
  }

  if (table.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const BenchPoint& pt : table.points) {
      const double lx = std::log(static_cast<double>(pt.n));
      const double ly = std::log(std::max(pt.seconds, 1e-9));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double k = static_cast<double>(table.points.size());
    table.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  return table;
}

void write_bench_file(const std::string& file, const std::string& format,
                      const BenchTable& table) {
  if (format == "csv") {
    std::ofstream out = open_out(file);
    out << kCsvStamp << "\n";
    out << "n,seconds\n";
    for (const BenchPoint& pt : table.points)
      out << pt.n << ',' << fmt_real(pt.seconds) << "\n";
    out << "# slope: " << fmt_real(table.slope) << "\n";
    return;
  }
  json rows = json::array();
  for (const BenchPoint& pt : table.points)
    rows.push_back({{"n", pt.n}, {"seconds", fmt_real(pt.seconds)}});
  open_out(file) << json{{"format_version", kFormatVersion},
                         {"bench", rows},
                         {"slope", fmt_real(table.slope)}}
                        .dump(1)
                 << "\n";
}

int cmd_path(const RunConfig& config, const std::string& out_dir) {
  const ProblemData prob = assemble_problem(config);
  PathOptions opt;
  opt.stop.max_steps = config.max_steps;
  opt.stop.min_lambda = config.min_lambda;
  opt.stop.max_df = config.max_df;
  const SolutionPath path = run_configured_path(prob, opt);
  write_path_artifact(out_dir, config, prob, path);
  std::cout << "knots: " << path.knots().size()
            << "  termination: " << to_string(path.termination())
            << "  lambda_min: " << fmt_real(path.lambda_min()) << "\n";
  if (path.termination() == TerminationReason::Aborted) {
    std::cerr << path.failure() << "\n";
    return 3;
  }
  return 0;
}

int cmd_coef(const std::string& artifact_dir, std::optional<double> lambda,
             std::optional<Eigen::Index> df, const std::string& out_file,
             const std::string& format) {
  if (lambda.has_value() == df.has_value()) {
    throw InputError("pass exactly one of --lambda and --df");
  }
  const SolutionPath path = load_path_artifact(artifact_dir);
  double at = 0.0;
  if (df) {
    at = lambda_for_df(path, *df);
  } else {
    at = *lambda;
    if (std::isnan(at) || at < 0.0) throw InputError("lambda must be nonnegative");
  }
  Eigen::VectorXd beta;
  try {
    beta = path.primal_at(at);
  } catch (const RangeError& err) {
    std::cerr << err.what() << "; achievable range: lambda in ["
              << fmt_real(path.lambda_min()) << ", inf]\n";
    return 4;
  }
  write_coef_file(out_file, format, beta);
  std::cout << "lambda: " << fmt_real(at) << "  coefficients: " << beta.size()
            << "\n";
  return 0;
}

int cmd_bench(const RunConfig& config, const std::vector<Eigen::Index>& sizes,
              Eigen::Index steps, int repeats, const std::string& out_file) {
  const BenchTable table =
      run_bench(config.problem, config.order, sizes, steps, config.seed, repeats);
  write_bench_file(out_file, config.format, table);
  for (const BenchPoint& pt : table.points) {
    std::cout << "n " << pt.n << ": " << fmt_real(pt.seconds) << " s\n";
  }
  std::cout << "log-log slope: " << fmt_real(table.slope) << "\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"exact solution paths for generalized lasso problems"};
  app.require_subcommand(1);

  RunConfig conf;
  std::string out;
  std::string artifact;
  double lambda_at = 0.0;
  Eigen::Index df_at = 0;
  std::vector<Eigen::Index> sizes{1000, 10000, 100000};
  Eigen::Index steps = 100;
  int repeats = 3;

  CLI::App* path_cmd =
      app.add_subcommand("path", "compute a solution path and write its artifact");
  path_cmd->add_option("--problem", conf.problem, "fl1d | flgraph | sfl | tf | custom")
      ->required();
  path_cmd->add_option("--order", conf.order, "difference order (tf)");
  path_cmd->add_option("--alpha", conf.alpha, "sparsity weight (sfl)");
  path_cmd->add_option("--y", conf.y, "observations CSV")->required();
  path_cmd->add_option("--x", conf.x, "design matrix CSV");
  path_cmd->add_option("--edges", conf.edges, "edge-list CSV (flgraph, sfl)");
  path_cmd->add_option("--d", conf.d, "penalty triplet CSV (custom)");
  path_cmd->add_option("--max_steps", conf.max_steps, "stop after this many knots");
  path_cmd->add_option("--min_lambda", conf.min_lambda, "stop at or below this lambda");
  path_cmd->add_option("--max_df", conf.max_df, "stop once df exceeds this");
  path_cmd->add_option("--format", conf.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  path_cmd->add_option("--out", out, "artifact directory")->required();

  CLI::App* coef_cmd =
      app.add_subcommand("coef", "evaluate coefficients from a path artifact");
  coef_cmd->add_option("--artifact", artifact, "directory written by 'path'")
      ->required();
  CLI::Option* opt_lambda =
      coef_cmd->add_option("--lambda", lambda_at, "evaluation lambda");
  CLI::Option* opt_df = coef_cmd->add_option("--df", df_at, "target degrees of freedom");
  opt_lambda->excludes(opt_df);
  coef_cmd->add_option("--out", out, "coefficient file")->required();
  coef_cmd->add_option("--format", conf.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "time the first path steps on synthetic data");
  bench_cmd->add_option("--problem", conf.problem, "fl1d | tf | fl2d")->required();
  bench_cmd->add_option("--order", conf.order, "difference order (tf)");
  bench_cmd->add_option("--sizes", sizes, "problem sizes")->delimiter(',');
  bench_cmd->add_option("--steps", steps, "steps to time per size");
  bench_cmd->add_option("--repeats", repeats, "repetitions, best kept");
  bench_cmd->add_option("--seed", conf.seed, "generator seed");
  bench_cmd->add_option("--format", conf.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  bench_cmd->add_option("--out", out, "timing table file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (path_cmd->parsed()) return cmd_path(conf, out);
    if (coef_cmd->parsed()) {
      std::optional<double> lambda;
      std::optional<Eigen::Index> df;
      if (opt_lambda->count() > 0) lambda = lambda_at;
      if (opt_df->count() > 0) df = df_at;
      return cmd_coef(artifact, lambda, df, out, conf.format);
    }
    return cmd_bench(conf, sizes, steps, repeats, out);
  } catch (const RangeError& err) {
    std::cerr << err.what() << "\n";
    return 4;
  } catch (const NumericalError& err) {
    std::cerr << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << err.what() << "\n";
    return 2;
  }
}

}  // namespace genpath
