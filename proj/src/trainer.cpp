#include "rankex/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace rankex {

using nlohmann::json;

namespace {

constexpr uint64_t kShuffleStream = 0x73687566;
constexpr uint64_t kDropoutStream = 0x64726f70;

struct BatchOutcome {
  double loss_sum = 0.0;
  ModelParams grads;
};

// Forward/backward over bags [lo, hi) of the shuffled order, accumulating
// into one private buffer. Per-bag dropout streams are derived from
// (seed, epoch, slot) so the draw does not depend on threading.
void run_slice(const std::vector<MentionBag>& bags, const std::vector<size_t>& order, size_t lo,
               size_t hi, size_t epoch, const ModelParams& params, const TrainConfig& cfg,
               int nr_index, BatchOutcome* out, std::string* bad_bag) {
  for (size_t slot = lo; slot < hi; ++slot) {
    const MentionBag& bag = bags[order[slot]];
    Rng drop_rng(hash_combine(hash_combine(cfg.seed, kDropoutStream),
                              hash_combine(epoch, static_cast<uint64_t>(slot))));
    const BagForward fwd = bag_forward(bag, params, cfg.ranking, cfg.variant, nr_index, &drop_rng,
                                       cfg.dropout_keep, true);
    // a NaN score slips through the hinge comparisons as a zero loss, so the
    // whole score table is checked, not just the value
    if (!std::isfinite(fwd.report.value) || !fwd.report.scores.all_finite()) {
      *bad_bag = bag.tuple_id;
      return;
    }
    out->loss_sum += fwd.report.value;
    bag_backward(fwd, bag, params, cfg.ranking, &out->grads);
  }
}

}  // namespace

TrainResult train(const std::vector<MentionBag>& bags, const RelationSchema& schema, int vocab_size,
                  const TrainConfig& cfg, const std::vector<MentionBag>* dev_bags,
                  std::ostream* progress, const ModelParams* initial) {
  if (bags.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.batch_size < 1 || cfg.learning_rate < 0.0 || cfg.epochs < 0) {
    throw std::invalid_argument("train: bad config");
  }
  TrainResult result;
  if (initial != nullptr) {
    if (initial->enc.V.rows != vocab_size || initial->W.rows != schema.num_classes()) {
      throw std::invalid_argument("train: initial parameters do not match vocabulary/schema");
    }
    result.params = *initial;
  } else {
    result.params = init_params(cfg.dims, vocab_size, schema.num_classes(), cfg.seed);
  }
  result.final_params = result.params;

  Rng shuffle_rng(hash_combine(cfg.seed, kShuffleStream));
  std::vector<size_t> order(bags.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int workers = std::max(1, cfg.threads);
  double best_f = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const size_t count = end - start;
      std::vector<BatchOutcome> outcomes(workers);
      std::vector<std::string> bad(workers);
      for (auto& o : outcomes) o.grads = zeros_like(result.final_params);
      if (workers == 1 || count < 2) {
        run_slice(bags, order, start, end, epoch, result.final_params, cfg, schema.nr_index,
                  &outcomes[0], &bad[0]);
      } else {
        std::vector<std::thread> pool;
        const size_t chunk = (count + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
          const size_t lo = std::min(end, start + w * chunk);
          const size_t hi = std::min(end, lo + chunk);
          if (lo < hi) {
            pool.emplace_back(run_slice, std::cref(bags), std::cref(order), lo, hi,
                              static_cast<size_t>(epoch), std::cref(result.final_params),
                              std::cref(cfg), schema.nr_index, &outcomes[w], &bad[w]);
          }
        }
        for (auto& t : pool) t.join();
      }
      for (const auto& b : bad) {
        if (!b.empty()) throw std::runtime_error("train: non-finite loss at bag \"" + b + "\"");
      }
      // Reduce worker buffers in worker order, then take one mean-gradient step.
      for (int w = 1; w < workers; ++w) {
        add_scaled_params(&outcomes[0].grads, 1.0, outcomes[w].grads);
        outcomes[0].loss_sum += outcomes[w].loss_sum;
      }
      epoch_loss += outcomes[0].loss_sum;
      add_scaled_params(&result.final_params, -cfg.learning_rate / static_cast<double>(count),
                        outcomes[0].grads);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = epoch_loss / static_cast<double>(bags.size());
    if (dev_bags != nullptr && !dev_bags->empty()) {
      const PRCurve curve = pr_curve(*dev_bags, result.final_params, cfg.agg_mode(),
                                     cfg.ranking.att_bias, schema.nr_index, cfg.threads);
      m.dev_max_f = max_f(curve);
      if (*m.dev_max_f > best_f) {
        best_f = *m.dev_max_f;
        result.best_epoch = epoch;
        result.params = result.final_params;
      }
    }
    result.metrics.push_back(m);
    if (progress != nullptr) {
      *progress << "epoch " << epoch << " mean_loss=" << m.mean_loss;
      if (m.dev_max_f) *progress << " dev_max_f=" << *m.dev_max_f;
      *progress << "\n";
    }
  }
  if (result.best_epoch == 0) result.params = result.final_params;
  return result;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,mean_loss,dev_max_f\n";
  for (const auto& m : metrics) {
    out << m.epoch << ',' << fmt_double(m.mean_loss) << ','
        << (m.dev_max_f ? fmt_double(*m.dev_max_f) : "nan") << "\n";
  }
}

namespace {

void write_blob(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (double v : values) {
    const uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  }
}

std::vector<double> read_blob(const std::filesystem::path& path, size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes != expected * 4) {
    throw std::runtime_error("checkpoint: " + path.filename().string() + " holds " +
                             std::to_string(bytes / 4) + " floats, manifest expects " +
                             std::to_string(expected));
  }
  in.seekg(0);
  std::vector<double> out(expected);
  for (size_t i = 0; i < expected; ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: short read in " + path.filename().string());
    const uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                          (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                     const Vocabulary& vocab, const RelationSchema& schema, const TrainConfig& cfg) {
  if (!params.all_finite()) throw std::runtime_error("save_checkpoint: non-finite parameters");
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "rankex-checkpoint-v1";
  manifest["dims"] = {{"d1", cfg.dims.d1},
                      {"d2", cfg.dims.d2},
                      {"d_s", cfg.dims.d_s},
                      {"d_win", cfg.dims.d_win},
                      {"clip", cfg.dims.clip},
                      {"separate_position_tables", cfg.dims.separate_position_tables}};
  manifest["vocab_size"] = params.enc.V.rows;
  manifest["num_classes"] = params.W.rows;
  manifest["schema"] = {{"names", schema.names}, {"nr_index", schema.nr_index}};
  manifest["train"] = {{"variant", cfg.variant},          {"batch_size", cfg.batch_size},
                       {"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
                       {"dropout_keep", cfg.dropout_keep},   {"seed", cfg.seed},
                       {"threads", cfg.threads}};
  manifest["ranking"] = {{"rho", cfg.ranking.rho},
                         {"sigma_plus", cfg.ranking.sigma_plus},
                         {"sigma_minus", cfg.ranking.sigma_minus},
                         {"relieve_nr", cfg.ranking.relieve_nr},
                         {"att_bias", cfg.ranking.att_bias}};
  manifest["vocab_file"] = "vocab.json";

  write_blob(dir / "V.bin", params.enc.V.data);
  write_blob(dir / "P.bin", params.enc.P.data);
  if (!params.enc.P2.empty()) write_blob(dir / "P2.bin", params.enc.P2.data);
  std::vector<double> kernel_data;
  for (const auto& k : params.enc.kernels) {
    kernel_data.insert(kernel_data.end(), k.data.begin(), k.data.end());
  }
  write_blob(dir / "kernels.bin", kernel_data);
  write_blob(dir / "bias.bin", params.enc.bias);
  write_blob(dir / "W.bin", params.W.data);
  vocab.save(dir / "vocab.json");

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest.json");
  out << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("checkpoint: cannot open manifest.json in " + dir.string());
  json manifest = json::parse(in);
  if (manifest.value("format", "") != "rankex-checkpoint-v1") {
    throw std::runtime_error("checkpoint: unknown format tag");
  }
  LoadedCheckpoint ck;
  const auto& jd = manifest.at("dims");
  ck.cfg.dims.d1 = jd.at("d1").get<int>();
  ck.cfg.dims.d2 = jd.at("d2").get<int>();
  ck.cfg.dims.d_s = jd.at("d_s").get<int>();
  ck.cfg.dims.d_win = jd.at("d_win").get<int>();
  ck.cfg.dims.clip = jd.at("clip").get<int>();
  ck.cfg.dims.separate_position_tables = jd.at("separate_position_tables").get<bool>();
  const auto& jt = manifest.at("train");
  ck.cfg.variant = jt.at("variant").get<int>();
  ck.cfg.batch_size = jt.at("batch_size").get<int>();
  ck.cfg.learning_rate = jt.at("learning_rate").get<double>();
  ck.cfg.epochs = jt.at("epochs").get<int>();
  ck.cfg.dropout_keep = jt.at("dropout_keep").get<double>();
  ck.cfg.seed = jt.at("seed").get<uint64_t>();
  ck.cfg.threads = jt.at("threads").get<int>();
  const auto& jr = manifest.at("ranking");
  ck.cfg.ranking.rho = jr.at("rho").get<double>();
  ck.cfg.ranking.sigma_plus = jr.at("sigma_plus").get<double>();
  ck.cfg.ranking.sigma_minus = jr.at("sigma_minus").get<double>();
  ck.cfg.ranking.relieve_nr = jr.at("relieve_nr").get<bool>();
  ck.cfg.ranking.att_bias = jr.at("att_bias").get<double>();

  ck.schema.names = manifest.at("schema").at("names").get<std::vector<std::string>>();
  ck.schema.nr_index = manifest.at("schema").at("nr_index").get<int>();
  const int vocab_size = manifest.at("vocab_size").get<int>();
  const int num_classes = manifest.at("num_classes").get<int>();
  if (num_classes != ck.schema.num_classes()) {
    throw std::runtime_error("checkpoint: num_classes disagrees with schema");
  }
  if (ck.schema.nr_index < 0 || ck.schema.nr_index >= num_classes) {
    throw std::runtime_error("checkpoint: nr_index out of range");
  }

  const ModelDims& dims = ck.cfg.dims;
  ck.params.enc.V = DenseMatrix(vocab_size, dims.d1);
  ck.params.enc.V.data = read_blob(dir / "V.bin", ck.params.enc.V.size());
  ck.params.enc.P = DenseMatrix(dims.l_p(), dims.d2);
  ck.params.enc.P.data = read_blob(dir / "P.bin", ck.params.enc.P.size());
  if (dims.separate_position_tables) {
    ck.params.enc.P2 = DenseMatrix(dims.l_p(), dims.d2);
    ck.params.enc.P2.data = read_blob(dir / "P2.bin", ck.params.enc.P2.size());
  }
  const std::vector<double> kernel_data =
      read_blob(dir / "kernels.bin", static_cast<size_t>(dims.d_s) * dims.d_win * dims.d_w());
  ck.params.enc.kernels.assign(dims.d_s, DenseMatrix(dims.d_win, dims.d_w()));
  for (int k = 0; k < dims.d_s; ++k) {
    const auto* begin = kernel_data.data() + static_cast<size_t>(k) * dims.d_win * dims.d_w();
    std::copy(begin, begin + static_cast<size_t>(dims.d_win) * dims.d_w(),
              ck.params.enc.kernels[k].data.begin());
  }
  ck.params.enc.bias = read_blob(dir / "bias.bin", dims.d_s);
  ck.params.W = DenseMatrix(num_classes, dims.d_f());
  ck.params.W.data = read_blob(dir / "W.bin", ck.params.W.size());
  if (!ck.params.all_finite()) throw std::runtime_error("checkpoint: non-finite parameters");

  ck.vocab = Vocabulary::load(dir / manifest.at("vocab_file").get<std::string>());
  if (ck.vocab.size() != vocab_size) {
    throw std::runtime_error("checkpoint: vocabulary size disagrees with manifest");
  }
  return ck;
}

}  // namespace rankex
