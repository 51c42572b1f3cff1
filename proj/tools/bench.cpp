#include <chrono>
#include <cmath>
#include <iostream>

#include "marc/encoder.hpp"
#include "marc/matrix.hpp"
#include "marc/relgraph.hpp"
#include "marc/rng.hpp"

using namespace marc;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

Matrix random_matrix(int r, int c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

void bench_matmul(int n, int reps, Rng& rng) {
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  Matrix out_serial, out_omp;
  kernels::matmul_serial(a, b, out_serial);  // warm-up
  kernels::matmul_omp(a, b, out_omp);

  const double t0 = now_ms();
  for (int i = 0; i < reps; ++i) kernels::matmul_serial(a, b, out_serial);
  const double serial_ms = (now_ms() - t0) / reps;

  const double t1 = now_ms();
  for (int i = 0; i < reps; ++i) kernels::matmul_omp(a, b, out_omp);
  const double omp_ms = (now_ms() - t1) / reps;

  double max_diff = 0.0;
  for (size_t i = 0; i < out_serial.size(); ++i)
    max_diff = std::max(max_diff, std::abs(out_serial.data[i] - out_omp.data[i]));

  const double gflop = 2.0 * n * n * n / 1e9;
  std::cout << "matmul " << n << "x" << n << ": serial " << serial_ms << " ms ("
            << gflop / (serial_ms / 1e3) << " GFLOP/s), omp[" << kernels::threads() << "] "
            << omp_ms << " ms (" << gflop / (omp_ms / 1e3) << " GFLOP/s), speedup "
            << serial_ms / omp_ms << "x, max |diff| " << max_diff << "\n";
}

void bench_encoder(int batch, int entities, int reps, Rng& rng) {
  RelationSet rels = relation_preset("default");
  std::vector<Entity> ents(entities);
  std::uniform_int_distribution<int> pos(0, 9);
  const int d = 5;
  std::vector<RelationalGraph> graphs;
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < entities; ++i) {
      ents[i].x = pos(rng);
      ents[i].y = pos(rng);
      ents[i].features.assign(d, 0.0);
      ents[i].features[i % d] = 1.0;
      ents[i].entity_id = i;
    }
    graphs.push_back(build_graph(ents, rels));
  }
  std::vector<const RelationalGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);

  EncoderConfig cfg;
  Encoder enc(cfg, d, 10.0, rels, rng);

  Tape t;
  const double t0 = now_ms();
  Var batched;
  for (int i = 0; i < reps; ++i) {
    t.reset();
    batched = enc.encode(t, ptrs);
  }
  const double batched_ms = (now_ms() - t0) / reps;
  const Matrix out_batched = t.value(batched);

  Tape t2;
  const double t1 = now_ms();
  std::vector<Var> cols;
  for (int i = 0; i < reps; ++i) {
    t2.reset();
    cols.clear();
    for (const auto* g : ptrs) cols.push_back(enc.encode_one(t2, *g));
  }
  const double ref_ms = (now_ms() - t1) / reps;
  const Matrix out_ref = t2.value(t2.hstack(cols));

  double max_diff = 0.0;
  for (size_t i = 0; i < out_batched.size(); ++i)
    max_diff = std::max(max_diff, std::abs(out_batched.data[i] - out_ref.data[i]));

  std::cout << "encoder batch=" << batch << " entities=" << entities << ": grouped " << batched_ms
            << " ms, per-graph reference " << ref_ms << " ms, speedup " << ref_ms / batched_ms
            << "x, max |diff| " << max_diff << "\n";
}

}  // namespace

int main() {
  Rng rng(42);
  std::cout << "OpenMP threads: " << kernels::threads() << "\n";
  bench_matmul(64, 50, rng);
  bench_matmul(256, 10, rng);
  bench_matmul(512, 3, rng);
  bench_encoder(256, 6, 5, rng);
  return 0;
}
