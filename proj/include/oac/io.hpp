#pragma once

// Plain-text documents for the objects the command line tools exchange:
// plants, topologies, channels, synthesis results, codebooks, and closed
// loops. One object per file. The format is line oriented:
//
//   oac <kind>
//   <key> <value>            scalar or single-token text field
//   matrix <key> <rows> <cols>
//   <cols numbers>           one line per row, shortest round-trip decimals
//
// '#' starts a comment anywhere; blank lines are ignored; keys are unique.
// Numbers survive a write/read cycle bit for bit.

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <oac/factorization.hpp>
#include <oac/model.hpp>
#include <oac/simulate.hpp>
#include <oac/synthesis.hpp>
#include <oac/text.hpp>

namespace oac {

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

/// Ordered bag of named scalar, text, and matrix fields under a kind tag.
/// Field order is preserved through write/read, so documents diff cleanly.
class Document {
 public:
  explicit Document(std::string kind) : kind_(std::move(kind)) {
    detail::require(!kind_.empty() && kind_.find_first_of(" \t\n#") == std::string::npos,
                    "Document: kind must be a single token");
  }

  const std::string& kind() const { return kind_; }

  void set_number(const std::string& key, double v) {
    claim(key);
    numbers_.emplace_back(key, v);
  }

  void set_text(const std::string& key, const std::string& v) {
    detail::require(!v.empty() && v.find_first_of(" \t\n#") == std::string::npos,
                    "Document: text values must be single tokens");
    claim(key);
    texts_.emplace_back(key, v);
  }

  void set_matrix(const std::string& key, Matrix v) {
    claim(key);
    matrices_.emplace_back(key, std::move(v));
  }

  /// Column vector convenience for histories and other sequences.
  void set_vector(const std::string& key, const std::vector<double>& v) {
    Matrix M(static_cast<int>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) M(static_cast<int>(i), 0) = v[i];
    set_matrix(key, std::move(M));
  }

  bool has(const std::string& key) const {
    return find(numbers_, key) || find(texts_, key) || find(matrices_, key);
  }

  double number(const std::string& key) const {
    if (auto* v = find(numbers_, key)) return *v;
    throw std::invalid_argument("Document(" + kind_ + "): no number field '" + key + "'");
  }

  const std::string& text(const std::string& key) const {
    if (auto* v = find(texts_, key)) return *v;
    throw std::invalid_argument("Document(" + kind_ + "): no text field '" + key + "'");
  }

  const Matrix& matrix(const std::string& key) const {
    if (auto* v = find(matrices_, key)) return *v;
    throw std::invalid_argument("Document(" + kind_ + "): no matrix field '" + key + "'");
  }

  std::vector<double> vector(const std::string& key) const {
    const Matrix& M = matrix(key);
    detail::require(M.cols() == 1 || M.size() == 0, "Document: field is not a column vector");
    std::vector<double> out(static_cast<std::size_t>(M.rows()));
    for (int i = 0; i < M.rows(); ++i) out[static_cast<std::size_t>(i)] = M(i, 0);
    return out;
  }

  const std::vector<std::pair<std::string, double>>& numbers() const { return numbers_; }
  const std::vector<std::pair<std::string, std::string>>& texts() const { return texts_; }
  const std::vector<std::pair<std::string, Matrix>>& matrices() const { return matrices_; }

 private:
  template <class V>
  static const typename V::value_type::second_type* find(const V& fields, const std::string& key) {
    for (const auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }

  void claim(const std::string& key) {
    detail::require(!key.empty() && key.find_first_of(" \t\n#") == std::string::npos,
                    "Document: keys must be single tokens");
    detail::require(!has(key), "Document: duplicate key '" + key + "'");
    order_.push_back(key);
  }

  std::string kind_;
  std::vector<std::string> order_;
  std::vector<std::pair<std::string, double>> numbers_;
  std::vector<std::pair<std::string, std::string>> texts_;
  std::vector<std::pair<std::string, Matrix>> matrices_;
};

// ---------------------------------------------------------------------------
// Reading and writing
// ---------------------------------------------------------------------------

inline void write_document(const Document& doc, std::ostream& out) {
  out << "oac " << doc.kind() << '\n';
  for (const auto& [k, v] : doc.numbers()) out << k << ' ' << detail::format_double(v) << '\n';
  for (const auto& [k, v] : doc.texts()) out << k << ' ' << v << '\n';
  for (const auto& [k, M] : doc.matrices()) {
    out << "matrix " << k << ' ' << M.rows() << ' ' << M.cols() << '\n';
    for (int i = 0; i < M.rows(); ++i) {
      for (int j = 0; j < M.cols(); ++j) {
        if (j) out << ' ';
        out << detail::format_double(M(i, j));
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_document: stream write failed");
}

inline void write_document(const Document& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_document: cannot open " + path);
  write_document(doc, out);
}

namespace detail {

/// Next content line: comments stripped, trimmed, never blank. False at EOF.
inline bool next_content_line(std::istream& in, std::string& line, int& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) return true;
  }
  return false;
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void parse_fail(int lineno, const std::string& msg) {
  throw std::runtime_error("document line " + std::to_string(lineno) + ": " + msg);
}

}  // namespace detail

inline Document read_document(std::istream& in) {
  std::string line;
  int lineno = 0;
  if (!detail::next_content_line(in, line, lineno))
    throw std::runtime_error("read_document: empty input");
  auto header = detail::split_tokens(line);
  if (header.size() != 2 || header[0] != "oac")
    detail::parse_fail(lineno, "expected header 'oac <kind>'");
  Document doc(header[1]);

  while (detail::next_content_line(in, line, lineno)) {
    auto toks = detail::split_tokens(line);
    if (toks[0] == "matrix") {
      if (toks.size() != 4) detail::parse_fail(lineno, "expected 'matrix <key> <rows> <cols>'");
      long long rows = detail::parse_int(toks[2], "matrix rows");
      long long cols = detail::parse_int(toks[3], "matrix cols");
      if (rows < 0 || cols < 0) detail::parse_fail(lineno, "negative matrix dimensions");
      Matrix M(rows, cols);
      for (long long i = 0; i < rows; ++i) {
        if (!detail::next_content_line(in, line, lineno))
          detail::parse_fail(lineno, "matrix '" + toks[1] + "' truncated");
        auto entries = detail::split_tokens(line);
        if (static_cast<long long>(entries.size()) != cols)
          detail::parse_fail(lineno, "matrix '" + toks[1] + "' row has wrong width");
        for (long long j = 0; j < cols; ++j)
          M(i, j) = detail::parse_double(entries[static_cast<std::size_t>(j)], "matrix entry");
      }
      doc.set_matrix(toks[1], std::move(M));
    } else {
      if (toks.size() != 2) detail::parse_fail(lineno, "expected '<key> <value>'");
      // A field is numeric when its value parses fully as a number.
      try {
        double v = detail::parse_double(toks[1], toks[0]);
        doc.set_number(toks[0], v);
      } catch (const std::invalid_argument&) {
        doc.set_text(toks[0], toks[1]);
      }
    }
  }
  return doc;
}

inline Document read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_document: cannot open " + path);
  return read_document(in);
}

namespace detail {

inline void require_kind(const Document& doc, const std::string& kind) {
  if (doc.kind() != kind)
    throw std::runtime_error("expected a '" + kind + "' document, got '" + doc.kind() + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Typed documents
// ---------------------------------------------------------------------------

inline void save_plant(const PlantModel& plant, const std::string& path) {
  Document doc("plant");
  doc.set_number("delta", plant.delta());
  doc.set_matrix("A", plant.A());
  doc.set_matrix("B", plant.B());
  doc.set_matrix("C", plant.C());
  write_document(doc, path);
}

inline PlantModel load_plant(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "plant");
  return PlantModel(doc.matrix("A"), doc.matrix("B"), doc.matrix("C"), doc.number("delta"));
}

inline void save_topology(const NetworkTopology& topo, const std::string& path) {
  Document doc("topology");
  doc.set_matrix("support", topo.support());
  write_document(doc, path);
}

inline NetworkTopology load_topology(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "topology");
  return NetworkTopology::from_support(doc.matrix("support"));
}

inline void save_channel(const ChannelRealization& H, const std::string& path) {
  Document doc("channel");
  doc.set_number("sigma2", H.sigma2());
  doc.set_matrix("support", H.support());
  Matrix values = Matrix::Zero(H.actuators(), H.sensors());
  for (int i = 0; i < H.actuators(); ++i)
    for (int j = 0; j < H.sensors(); ++j)
      if (H.has(i, j)) values(i, j) = H.coeff(i, j);
  doc.set_matrix("values", values);
  write_document(doc, path);
}

inline ChannelRealization load_channel(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "channel");
  auto topo = NetworkTopology::from_support(doc.matrix("support"));
  return ChannelRealization(topo, doc.matrix("values"), doc.number("sigma2"));
}

inline void save_synthesis(const SynthesisResult& r, const std::string& path) {
  Document doc("synthesis");
  doc.set_text("status", to_string(r.status));
  doc.set_number("gamma", r.gamma);
  doc.set_number("outer_iterations", r.outer_iterations);
  doc.set_matrix("G", r.G);
  doc.set_matrix("X", r.X);
  doc.set_vector("gamma_history", r.gamma_history);
  write_document(doc, path);
}

inline SynthesisResult load_synthesis(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "synthesis");
  SynthesisResult r;
  const std::string& status = doc.text("status");
  if (status == to_string(SynthesisStatus::Converged)) r.status = SynthesisStatus::Converged;
  else if (status == to_string(SynthesisStatus::MaxIterations)) r.status = SynthesisStatus::MaxIterations;
  else if (status == to_string(SynthesisStatus::InfeasibleStructure)) r.status = SynthesisStatus::InfeasibleStructure;
  else throw std::runtime_error("load_synthesis: unknown status '" + status + "'");
  r.gamma = doc.number("gamma");
  r.outer_iterations = static_cast<int>(doc.number("outer_iterations"));
  r.G = doc.matrix("G");
  r.X = doc.matrix("X");
  r.gamma_history = doc.vector("gamma_history");
  return r;
}

/// Codebook file contents: the factors plus the run's diagnostics. The
/// status is kept as text, the convergence histories as column vectors.
struct CodeDocument {
  OacCode code;
  KktReport kkt;
  std::string status;
  double primal_residual = 0.0;
  int iterations = 0;
  std::vector<double> primal_history;
  std::vector<double> lambda_history;
};

inline void save_code(const AdmmResult& res, const std::string& path) {
  Document doc("code");
  doc.set_text("status", to_string(res.status));
  doc.set_number("iterations", res.iterations);
  doc.set_number("primal_residual", res.primal_residual);
  doc.set_number("kkt_r1", res.kkt.r1);
  doc.set_number("kkt_r2", res.kkt.r2);
  doc.set_number("kkt_r3", res.kkt.r3);
  doc.set_number("kkt_r4", res.kkt.r4);
  doc.set_number("kkt_r5", res.kkt.r5);
  doc.set_matrix("P", res.code.P);
  doc.set_matrix("D", res.code.D);
  doc.set_vector("primal_history", res.state.primal_history);
  doc.set_vector("lambda_history", res.state.lambda_history);
  write_document(doc, path);
}

inline CodeDocument load_code(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "code");
  CodeDocument out;
  out.status = doc.text("status");
  out.iterations = static_cast<int>(doc.number("iterations"));
  out.primal_residual = doc.number("primal_residual");
  out.kkt.r1 = doc.number("kkt_r1");
  out.kkt.r2 = doc.number("kkt_r2");
  out.kkt.r3 = doc.number("kkt_r3");
  out.kkt.r4 = doc.number("kkt_r4");
  out.kkt.r5 = doc.number("kkt_r5");
  out.code.P = doc.matrix("P");
  out.code.D = doc.matrix("D");
  out.primal_history = doc.vector("primal_history");
  out.lambda_history = doc.vector("lambda_history");
  return out;
}

inline void save_system(const ClosedLoopSystem& sys, const std::string& path) {
  Document doc("system");
  doc.set_number("sigma2", sys.sigma2);
  doc.set_matrix("A_hat", sys.A_hat);
  doc.set_matrix("B", sys.B);
  doc.set_matrix("D", sys.D);
  write_document(doc, path);
}

inline ClosedLoopSystem load_system(const std::string& path) {
  auto doc = read_document(path);
  detail::require_kind(doc, "system");
  ClosedLoopSystem sys{doc.matrix("A_hat"), doc.matrix("B"), doc.matrix("D"),
                       doc.number("sigma2")};
  sys.validate();
  return sys;
}

}  // namespace oac
