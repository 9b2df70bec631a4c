#include "rankex/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rankex {

bool ModelParams::all_finite() const {
  for (const auto& k : enc.kernels) {
    if (!k.all_finite()) return false;
  }
  for (double b : enc.bias) {
    if (!std::isfinite(b)) return false;
  }
  return enc.V.all_finite() && enc.P.all_finite() && (enc.P2.empty() || enc.P2.all_finite()) &&
         W.all_finite();
}

namespace {

void fill_uniform(DenseMatrix* m, Rng* rng, double lo, double hi) {
  for (double& v : m->data) v = rng->uniform(lo, hi);
}

double glorot_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

}  // namespace

ModelParams init_params(const ModelDims& dims, int vocab_size, int num_classes, uint64_t seed) {
  if (vocab_size < 1 || num_classes < 2) throw std::invalid_argument("init_params: bad sizes");
  Rng rng(seed);
  ModelParams p;
  p.enc.V = DenseMatrix(vocab_size, dims.d1);
  fill_uniform(&p.enc.V, &rng, -0.25, 0.25);
  p.enc.P = DenseMatrix(dims.l_p(), dims.d2);
  fill_uniform(&p.enc.P, &rng, -0.25, 0.25);
  if (dims.separate_position_tables) {
    p.enc.P2 = DenseMatrix(dims.l_p(), dims.d2);
    fill_uniform(&p.enc.P2, &rng, -0.25, 0.25);
  }
  const double kb = glorot_bound(dims.d_win * dims.d_w(), dims.d_s);
  p.enc.kernels.assign(dims.d_s, DenseMatrix(dims.d_win, dims.d_w()));
  for (auto& k : p.enc.kernels) fill_uniform(&k, &rng, -kb, kb);
  p.enc.bias.assign(dims.d_s, 0.0);
  const double wb = glorot_bound(dims.d_f(), num_classes);
  p.W = DenseMatrix(num_classes, dims.d_f());
  fill_uniform(&p.W, &rng, -wb, wb);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.enc.V = DenseMatrix(p.enc.V.rows, p.enc.V.cols);
  z.enc.P = DenseMatrix(p.enc.P.rows, p.enc.P.cols);
  if (!p.enc.P2.empty()) z.enc.P2 = DenseMatrix(p.enc.P2.rows, p.enc.P2.cols);
  z.enc.kernels.assign(p.enc.kernels.size(), DenseMatrix(p.enc.kernels[0].rows, p.enc.kernels[0].cols));
  z.enc.bias.assign(p.enc.bias.size(), 0.0);
  z.W = DenseMatrix(p.W.rows, p.W.cols);
  return z;
}

namespace {

template <class Fn>
void for_each_array(const ModelParams& p, Fn&& fn) {
  fn("V", p.enc.V.data);
  fn("P", p.enc.P.data);
  if (!p.enc.P2.empty()) fn("P2", p.enc.P2.data);
  for (size_t k = 0; k < p.enc.kernels.size(); ++k) fn("kernels", p.enc.kernels[k].data);
  fn("bias", p.enc.bias);
  fn("W", p.W.data);
}

template <class Fn>
void for_each_array(ModelParams& p, Fn&& fn) {
  fn("V", p.enc.V.data);
  fn("P", p.enc.P.data);
  if (!p.enc.P2.empty()) fn("P2", p.enc.P2.data);
  for (size_t k = 0; k < p.enc.kernels.size(); ++k) fn("kernels", p.enc.kernels[k].data);
  fn("bias", p.enc.bias);
  fn("W", p.W.data);
}

}  // namespace

void add_scaled_params(ModelParams* dst, double a, const ModelParams& src) {
  auto axpy = [a](std::vector<double>& d, const std::vector<double>& s) {
    if (d.size() != s.size()) throw std::invalid_argument("add_scaled_params: shape mismatch");
    for (size_t i = 0; i < d.size(); ++i) d[i] += a * s[i];
  };
  axpy(dst->enc.V.data, src.enc.V.data);
  axpy(dst->enc.P.data, src.enc.P.data);
  if (!dst->enc.P2.empty()) axpy(dst->enc.P2.data, src.enc.P2.data);
  for (size_t k = 0; k < dst->enc.kernels.size(); ++k) {
    axpy(dst->enc.kernels[k].data, src.enc.kernels[k].data);
  }
  axpy(dst->enc.bias, src.enc.bias);
  axpy(dst->W.data, src.W.data);
}

size_t param_count(const ModelParams& p) {
  size_t n = 0;
  for_each_array(p, [&n](const char*, const std::vector<double>& a) { n += a.size(); });
  return n;
}

std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> flat;
  flat.reserve(param_count(p));
  for_each_array(p, [&flat](const char*, const std::vector<double>& a) {
    flat.insert(flat.end(), a.begin(), a.end());
  });
  return flat;
}

void unflatten_params(std::span<const double> flat, ModelParams* p) {
  if (flat.size() != param_count(*p)) throw std::invalid_argument("unflatten_params: length mismatch");
  size_t off = 0;
  for_each_array(*p, [&](const char*, std::vector<double>& a) {
    std::copy(flat.begin() + off, flat.begin() + off + a.size(), a.begin());
    off += a.size();
  });
}

std::vector<ParamGroup> param_groups(const ModelParams& p) {
  std::vector<ParamGroup> groups;
  size_t off = 0;
  for_each_array(p, [&](const char* name, const std::vector<double>& a) {
    if (!groups.empty() && groups.back().name == name) {
      groups.back().end += a.size();
    } else {
      groups.push_back({name, off, off + a.size()});
    }
    off += a.size();
  });
  return groups;
}

int load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               DenseMatrix* V) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  int rows_set = 0;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) != V->cols) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(V->cols) + " floats");
    }
    auto it = vocab.word_to_id.find(word);
    if (it == vocab.word_to_id.end()) continue;
    std::copy(vals.begin(), vals.end(), V->row(it->second).begin());
    ++rows_set;
  }
  return rows_set;
}

}  // namespace rankex
