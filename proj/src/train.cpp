#include "mvad/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "mvad/errors.hpp"
#include "mvad/io.hpp"
#include "mvad/rng.hpp"

namespace mvad {

namespace {

std::vector<DenseMatrix*> tensor_list(ModelParams& p) {
  std::vector<DenseMatrix*> out;
  p.for_each_tensor([&](const std::string&, DenseMatrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const DenseMatrix*> tensor_list(const ModelParams& p) {
  std::vector<const DenseMatrix*> out;
  p.for_each_tensor([&](const std::string&, const DenseMatrix& m) { out.push_back(&m); });
  return out;
}

bool verbose() {
  const char* v = std::getenv("MVAD_VERBOSE");
  return v != nullptr && v[0] != '\0' && !(v[0] == '0' && v[1] == '\0');
}

}  // namespace

AdamState AdamState::init(const ModelParams& shape) {
  AdamState st;
  st.m = ModelParams::zeros_like(shape);
  st.v = ModelParams::zeros_like(shape);
  return st;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  auto ps = tensor_list(params);
  auto gs = tensor_list(grads);
  auto ms = tensor_list(state.m);
  auto vs = tensor_list(state.v);
  if (ps.size() != gs.size() || ps.size() != ms.size() || ps.size() != vs.size())
    throw ValidationError("adam_step: tensor counts differ");

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t t = 0; t < ps.size(); ++t) {
    DenseMatrix& p = *ps[t];
    const DenseMatrix& g = *gs[t];
    DenseMatrix& m = *ms[t];
    DenseMatrix& v = *vs[t];
    if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v))
      throw ValidationError("adam_step: tensor shapes differ");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = state.beta1 * m.data()[i] + (1.0 - state.beta1) * gi;
      v.data()[i] = state.beta2 * v.data()[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

ModelParams train(const MultiViewNetwork& network, const HyperParams& hp, TrainReport& report) {
  hp.validate();
  if (hp.epochs < 1) throw ValidationError("train: epochs must be >= 1");
  network.validate();

  report = TrainReport{};
  report.hp = hp;

  Rng init_rng = SeedStreams(hp.seed).stream("init");
  ModelParams params = ModelParams::glorot(hp, network.d, init_rng);
  const EncoderInputs inputs = prepare_inputs(network, hp);
  AdamState state = AdamState::init(params);

  const bool chatty = verbose();
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    GradResult r;
    try {
      r = grad(network, inputs, params, hp);
    } catch (const NumericError& e) {
      report.diverged = true;
      report.final_params_checksum = params.checksum();
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " +
                         e.what());
    }
    adam_step(params, r.grads, state, hp.learning_rate);

    bool finite = true;
    params.for_each_tensor([&](const std::string&, const DenseMatrix& m) {
      if (!m.all_finite()) finite = false;
    });
    if (!finite) {
      report.diverged = true;
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite parameters after update");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_total = r.outputs.loss_total;
    rec.loss_structure_mean = r.outputs.loss_structure_mean;
    rec.loss_attribute = r.outputs.loss_attribute;
    rec.attn_weights = r.outputs.attn_weights;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    report.epochs.push_back(std::move(rec));
    if (chatty && (epoch == 1 || epoch % 50 == 0 || epoch == hp.epochs))
      std::fprintf(stderr, "epoch %zu/%zu  loss %.6g\n", epoch, hp.epochs,
                   report.epochs.back().loss_total);
  }
  report.final_params_checksum = params.checksum();
  return params;
}

void save_train_report(const std::string& path, const TrainReport& report) {
  nlohmann::json j;
  j["hyperparams"] = {{"K", report.hp.K},
                      {"L", report.hp.L},
                      {"F_L", report.hp.F_L},
                      {"F_A", report.hp.F_A},
                      {"epsilon", report.hp.epsilon},
                      {"fusion", to_string(report.hp.fusion)},
                      {"encoder", to_string(report.hp.encoder)},
                      {"activation", to_string(report.hp.activation)},
                      {"learning_rate", report.hp.learning_rate},
                      {"epochs", report.hp.epochs},
                      {"seed", report.hp.seed},
                      {"block_rows", report.hp.block_rows}};
  j["completed_epochs"] = report.epochs.size();
  j["diverged"] = report.diverged;
  {
    std::ostringstream ss;
    ss << std::hex << report.final_params_checksum;
    j["final_params_checksum"] = "0x" + ss.str();
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& r : report.epochs)
    epochs.push_back({{"epoch", r.epoch},
                      {"loss_total", r.loss_total},
                      {"loss_structure_mean", r.loss_structure_mean},
                      {"loss_attribute", r.loss_attribute},
                      {"attention_weights", r.attn_weights},
                      {"wall_ms", r.wall_ms}});
  j["epochs"] = std::move(epochs);
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

const char* kCheckpointMagic = "mvad-checkpoint 1";

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const HyperParams& hp,
                     std::size_t n, std::size_t d) {
  params.validate_shapes(hp, d);
  std::string out;
  out += std::string(kCheckpointMagic) + "\n";
  out += "seed " + std::to_string(hp.seed) + "\n";
  out += "K " + std::to_string(hp.K) + "\n";
  out += "L " + std::to_string(hp.L) + "\n";
  out += "F_L " + std::to_string(hp.F_L) + "\n";
  out += "F_A " + std::to_string(hp.F_A) + "\n";
  out += "epsilon " + format_double(hp.epsilon) + "\n";
  out += "fusion " + to_string(hp.fusion) + "\n";
  out += "encoder " + to_string(hp.encoder) + "\n";
  out += "activation " + to_string(hp.activation) + "\n";
  out += "learning_rate " + format_double(hp.learning_rate) + "\n";
  out += "epochs " + std::to_string(hp.epochs) + "\n";
  out += "block_rows " + std::to_string(hp.block_rows) + "\n";
  out += "n " + std::to_string(n) + "\n";
  out += "d " + std::to_string(d) + "\n";

  std::size_t count = 0;
  params.for_each_tensor([&](const std::string&, const DenseMatrix&) { ++count; });
  out += "tensors " + std::to_string(count) + "\n";
  params.for_each_tensor([&](const std::string& name, const DenseMatrix& m) {
    out += "tensor " + name + " " + std::to_string(m.n_rows()) + " " +
           std::to_string(m.n_cols()) + "\n";
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
      for (std::size_t j = 0; j < m.n_cols(); ++j) {
        if (j) out += " ";
        out += format_double(m(i, j));
      }
      out += "\n";
    }
  });
  out += "checksum " + std::to_string(params.checksum()) + "\n";
  write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw ValidationError(path + ": truncated checkpoint, expected " + std::string(what));
    return line;
  };
  if (next_line("magic") != kCheckpointMagic)
    throw ValidationError(path + ": not a recognized checkpoint file");

  Checkpoint cp;
  auto kv = [&](const char* key) {
    next_line(key);
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty())
      throw ValidationError(path + ": expected '" + key + " <value>', got '" + line + "'");
    return v;
  };
  cp.hp.seed = std::stoull(kv("seed"));
  cp.hp.K = std::stoull(kv("K"));
  cp.hp.L = std::stoull(kv("L"));
  cp.hp.F_L = std::stoull(kv("F_L"));
  cp.hp.F_A = std::stoull(kv("F_A"));
  cp.hp.epsilon = std::stod(kv("epsilon"));
  cp.hp.fusion = fusion_from_string(kv("fusion"));
  cp.hp.encoder = encoder_from_string(kv("encoder"));
  cp.hp.activation = activation_from_string(kv("activation"));
  cp.hp.learning_rate = std::stod(kv("learning_rate"));
  cp.hp.epochs = std::stoull(kv("epochs"));
  cp.hp.block_rows = std::stoull(kv("block_rows"));
  cp.n = std::stoull(kv("n"));
  cp.d = std::stoull(kv("d"));
  cp.hp.validate();

  const std::size_t count = std::stoull(kv("tensors"));
  Rng dummy(0);
  cp.params = ModelParams::zeros_like(ModelParams::glorot(cp.hp, cp.d, dummy));

  std::size_t seen = 0;
  cp.params.for_each_tensor([&](const std::string& name, DenseMatrix& m) {
    ++seen;
    next_line("tensor header");
    std::istringstream hs(line);
    std::string word, got_name;
    std::size_t rows = 0, cols = 0;
    hs >> word >> got_name >> rows >> cols;
    if (word != "tensor" || got_name != name || rows != m.n_rows() || cols != m.n_cols())
      throw ValidationError(path + ": tensor header mismatch, got '" + line + "', expected '" +
                            name + "'");
    for (std::size_t i = 0; i < rows; ++i) {
      next_line("tensor row");
      std::istringstream rs(line);
      for (std::size_t j = 0; j < cols; ++j)
        if (!(rs >> m(i, j)))
          throw ValidationError(path + ": short tensor row for " + name);
      std::string extra;
      if (rs >> extra) throw ValidationError(path + ": long tensor row for " + name);
    }
  });
  if (seen != count)
    throw ValidationError(path + ": tensor count mismatch");
  const std::uint64_t want = std::stoull(kv("checksum"));
  if (cp.params.checksum() != want)
    throw ValidationError(path + ": checksum mismatch, file is corrupt");
  return cp;
}

}  // namespace mvad
