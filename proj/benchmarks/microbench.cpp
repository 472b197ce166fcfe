#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "voxstate/eval.hpp"
#include "voxstate/hyperalign.hpp"
#include "voxstate/layers.hpp"
#include "voxstate/matrix.hpp"
#include "voxstate/models.hpp"
#include "voxstate/network.hpp"
#include "voxstate/rng.hpp"
#include "voxstate/svd.hpp"

using namespace voxstate;
using nn::Mode;
using nn::Tensor;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal();
  return t;
}

// The mid-stack temporal convolution as a matrix product: 128 filters
// over 64 channels x kernel 10, 282 output positions.
void BM_GemmConvShape(benchmark::State& state) {
  const Matrix w = random_matrix(128, 640, 1);
  const Matrix col = random_matrix(640, 282, 2);
  for (auto _ : state) {
    Matrix y = matmul(w, col);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 *
                          128 * 640 * 282);
}
BENCHMARK(BM_GemmConvShape);

// The widest dense layer applied to one flattened sample.
void BM_GemmDenseHead(benchmark::State& state) {
  const Matrix x = random_matrix(1, 15744, 3);
  const Matrix w = random_matrix(1024, 15744, 4);
  for (auto _ : state) {
    Matrix y = matmul_a_bt(x, w);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 *
                          1024 * 15744);
}
BENCHMARK(BM_GemmDenseHead);

void BM_Svd(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 5);
  for (auto _ : state) {
    SvdResult r = svd(a);
    benchmark::DoNotOptimize(r.singular_values.data());
  }
}
BENCHMARK(BM_Svd)->Arg(30)->Arg(150);

void BM_Procrustes(benchmark::State& state) {
  Rng rng(6);
  const Matrix t = random_matrix(40, 30, 7);
  const Matrix q = random_orthogonal(30, rng);
  const Matrix x = matmul_a_bt(t, q);
  for (auto _ : state) {
    ProcrustesResult r = procrustes_rotation(x, t);
    benchmark::DoNotOptimize(r.rotation.data());
  }
}
BENCHMARK(BM_Procrustes);

void BM_HyperalignFit(benchmark::State& state) {
  Rng rng(8);
  const Matrix z = random_matrix(120, 60, 9);
  std::vector<SubjectMatrix> subs;
  for (int j = 0; j < 6; ++j) {
    const Matrix q = random_orthogonal(60, rng);
    subs.push_back({"s" + std::to_string(j), matmul_a_bt(z, q)});
  }
  HyperalignOptions opt;
  opt.q = 3;
  for (auto _ : state) {
    CommonSpace cs = hyperalign_fit(subs, opt);
    benchmark::DoNotOptimize(cs.t.data());
  }
}
BENCHMARK(BM_HyperalignFit);

void BM_Conv1dForward(benchmark::State& state) {
  nn::Conv conv("c", 1, 64, 128, 10);
  Rng base(10);
  std::size_t stream = 0;
  conv.init_params(base, stream);
  const Tensor x = random_tensor({1, 64, 291}, 11);
  for (auto _ : state) {
    Tensor y = conv.forward(x, Mode::kEval);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Conv1dForward);

void BM_Conv3dForward(benchmark::State& state) {
  nn::Conv conv("c", 3, 8, 8, 3, 1, 1);
  Rng base(12);
  std::size_t stream = 0;
  conv.init_params(base, stream);
  const Tensor x = random_tensor({1, 8, 6, 8, 8}, 13);
  for (auto _ : state) {
    Tensor y = conv.forward(x, Mode::kEval);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Conv3dForward);

void BM_PredictModelA(benchmark::State& state) {
  const ModelAConfig cfg;
  Rng rng(14);
  nn::Network net = build_model_a(cfg, rng);
  const Tensor x = random_tensor({1, 1, 300}, 15);
  for (auto _ : state) {
    Prediction p = predict(net, x);
    benchmark::DoNotOptimize(p.probabilities.data());
  }
}
BENCHMARK(BM_PredictModelA);

void BM_PredictModelABatch32(benchmark::State& state) {
  const ModelAConfig cfg;
  Rng rng(16);
  nn::Network net = build_model_a(cfg, rng);
  const Tensor x = random_tensor({32, 1, 300}, 17);
  for (auto _ : state) {
    EvalOutput out = evaluate_network(net, x, 32);
    benchmark::DoNotOptimize(out.predictions.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32);
}
BENCHMARK(BM_PredictModelABatch32);

void BM_PredictModelBTiny(benchmark::State& state) {
  const ModelBConfig cfg = ModelBConfig::tiny();
  Rng rng(18);
  nn::Network net = build_model_b(cfg, {16, 16, 11}, rng);
  const Tensor x = random_tensor({1, 1, 11, 16, 16}, 19);
  for (auto _ : state) {
    Prediction p = predict(net, x);
    benchmark::DoNotOptimize(p.probabilities.data());
  }
}
BENCHMARK(BM_PredictModelBTiny);

void BM_PredictModelBTinyBatch32(benchmark::State& state) {
  const ModelBConfig cfg = ModelBConfig::tiny();
  Rng rng(20);
  nn::Network net = build_model_b(cfg, {16, 16, 11}, rng);
  const Tensor x = random_tensor({32, 1, 11, 16, 16}, 21);
  for (auto _ : state) {
    EvalOutput out = evaluate_network(net, x, 32);
    benchmark::DoNotOptimize(out.predictions.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32);
}
BENCHMARK(BM_PredictModelBTinyBatch32);

}  // namespace

BENCHMARK_MAIN();
