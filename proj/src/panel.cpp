#include "ctxnet/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxnet {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

EventPanel::EventPanel(int T_plus_1, int M, int K, PanelKind kind)
    : T_plus_1_(T_plus_1), M_(M), K_(K), kind_(kind),
      data_(static_cast<std::size_t>(T_plus_1) * M * K, 0.0) {
  if (T_plus_1 < 1 || M < 1 || K < 1) {
    throw std::invalid_argument("EventPanel: dimensions must be positive");
  }
}

bool EventPanel::row_is_zero(int t, int m) const {
  for (int k = 0; k < K_; ++k) {
    if (at(t, m, k) != 0.0) return false;
  }
  return true;
}

int EventPanel::row_argmax(int t, int m) const {
  int best = 0;
  for (int k = 1; k < K_; ++k) {
    if (at(t, m, k) > at(t, m, best)) best = k;
  }
  return best;
}

void EventPanel::validate_and_normalize() {
  for (int t = 0; t < T_plus_1_; ++t) {
    for (int m = 0; m < M_; ++m) {
      double sum = 0.0;
      int ones = 0, nonzeros = 0;
      for (int k = 0; k < K_; ++k) {
        double v = at(t, m, k);
        if (v < 0.0) {
          throw std::runtime_error("EventPanel: negative entry at (t=" +
                                   std::to_string(t) + ", node=" + std::to_string(m) + ")");
        }
        sum += v;
        if (v != 0.0) ++nonzeros;
        if (v == 1.0) ++ones;
      }
      if (nonzeros == 0) continue;
      if (kind_ == PanelKind::Categorical) {
        if (!(ones == 1 && nonzeros == 1)) {
          throw std::runtime_error("EventPanel: row not one-hot at (t=" +
                                   std::to_string(t) + ", node=" + std::to_string(m) + ")");
        }
      } else {
        if (std::abs(sum - 1.0) > kSimplexTol) {
          throw std::runtime_error("EventPanel: row sum " + format_double(sum) +
                                   " off simplex at (t=" + std::to_string(t) +
                                   ", node=" + std::to_string(m) + ")");
        }
        // exact one-hot rows are simplex vertices and arise as initial
        // conditions; anything else must be strictly positive
        if (!(ones == 1 && nonzeros == 1)) {
          for (int k = 0; k < K_; ++k) {
            if (at(t, m, k) == 0.0) {
              throw std::runtime_error("EventPanel: zero entry in event row at (t=" +
                                       std::to_string(t) + ", node=" + std::to_string(m) + ")");
            }
          }
        }
        if (sum != 1.0) {
          for (int k = 0; k < K_; ++k) at(t, m, k) /= sum;
        }
      }
    }
  }
}

Eigen::VectorXd EventPanel::event_counts(int t_end) const {
  if (t_end < 0) t_end = T_plus_1_;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(M_);
  for (int t = 0; t < t_end; ++t) {
    for (int m = 0; m < M_; ++m) {
      if (!row_is_zero(t, m)) counts[m] += 1.0;
    }
  }
  return counts;
}

void EventPanel::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,node";
  for (int k = 1; k <= K_; ++k) out << ",x_" << k;
  out << "\n";
  for (int t = 0; t < T_plus_1_; ++t) {
    for (int m = 0; m < M_; ++m) {
      if (row_is_zero(t, m)) continue;
      out << t << ',' << m;
      for (int k = 0; k < K_; ++k) out << ',' << format_double(at(t, m, k));
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EventPanel EventPanel::read_csv(const std::string& path, PanelKind kind,
                                std::optional<int> T_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty CSV: " + path);

  int K = 0;
  {
    std::stringstream ss(header);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 3 || fields[0] != "t" || fields[1] != "node") {
      throw std::runtime_error("bad panel header in " + path);
    }
    K = static_cast<int>(fields.size()) - 2;
  }

  struct Row {
    int t, node;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  int max_t = 0, max_node = 0;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    Row r;
    try {
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("t");
      r.t = std::stoi(field);
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("node");
      r.node = std::stoi(field);
      for (int k = 0; k < K; ++k) {
        if (!std::getline(ss, field, ',')) throw std::invalid_argument("x");
        r.x.push_back(std::stod(field));
      }
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (r.t < 0 || r.node < 0) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative index");
    }
    max_t = std::max(max_t, r.t);
    max_node = std::max(max_node, r.node);
    rows.push_back(std::move(r));
  }

  int T_plus_1 = T_override ? *T_override + 1 : max_t + 1;
  int M = max_node + 1;
  if (max_t + 1 > T_plus_1) {
    throw std::runtime_error(path + ": row with t beyond requested T");
  }
  EventPanel panel(T_plus_1, M, K, kind);
  for (const Row& r : rows) {
    for (int k = 0; k < K; ++k) panel.at(r.t, r.node, k) = r.x[k];
  }
  panel.validate_and_normalize();
  return panel;
}

EventPanel EventPanel::window(int t_begin, int len) const {
  if (t_begin < 0 || len < 1 || t_begin + len > T_plus_1_) {
    throw std::invalid_argument("EventPanel::window: range outside panel");
  }
  EventPanel out(len, M_, K_, kind_);
  std::copy(data_.begin() + static_cast<std::size_t>(t_begin) * M_ * K_,
            data_.begin() + static_cast<std::size_t>(t_begin + len) * M_ * K_,
            out.data_.begin());
  return out;
}

}  // namespace ctxnet
