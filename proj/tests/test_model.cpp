#include <cstring>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "skeletor/model.hpp"
#include "support.hpp"

namespace skeletor {
namespace {

using testing::expect_error_kind;
using testing::random_tensor;

ModelConfig toy_config() {
  ModelConfig c;
  c.joints = 5;
  c.d_model = 8;
  c.n_layers = 2;
  c.heads = 2;
  c.d_k = 4;
  c.d_v = 4;
  c.d_ff = 16;
  c.window = 4;
  return c;
}

// Initialised parameters with every tensor (biases and gains included)
// jittered, so that no term of the network is trivially zero or one.
Parameters jittered_parameters(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  Parameters p = init_parameters(config, rng);
  p.visit([&](const std::string&, Tensor& t) {
    for (double& x : t.data()) x += rng.uniform(-0.3, 0.3);
  });
  return p;
}

void expect_close(const Tensor& got, const oracle::Mat& want, double tol) {
  ASSERT_EQ(got.rows(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    ASSERT_EQ(got.cols(), want[i].size());
    for (std::size_t j = 0; j < want[i].size(); ++j) EXPECT_NEAR(got.at(i, j), want[i][j], tol);
  }
}

LayerWeights<Var> bind_layer(Tape& tape, const LayerWeights<Tensor>& w) {
  LayerWeights<Var> v;
  auto leaf = [&](const Tensor& t) { return tape.constant(t); };
  for (const auto& t : w.query) v.query.push_back(leaf(t));
  for (const auto& t : w.key) v.key.push_back(leaf(t));
  for (const auto& t : w.value) v.value.push_back(leaf(t));
  v.output = leaf(w.output);
  v.ffn_w1 = leaf(w.ffn_w1);
  v.ffn_b1 = leaf(w.ffn_b1);
  v.ffn_w2 = leaf(w.ffn_w2);
  v.ffn_b2 = leaf(w.ffn_b2);
  v.norm1_gain = leaf(w.norm1_gain);
  v.norm1_bias = leaf(w.norm1_bias);
  v.norm2_gain = leaf(w.norm2_gain);
  v.norm2_bias = leaf(w.norm2_bias);
  return v;
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c = toy_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_EQ(c.input_dim(), 20u);
  c.use_confidence = false;
  EXPECT_EQ(c.input_dim(), 15u);
  c.d_model = 7;
  expect_error_kind([&] { c.validate(); }, ErrorKind::config);
  c = toy_config();
  c.n_layers = 0;
  expect_error_kind([&] { c.validate(); }, ErrorKind::config);
  expect_error_kind([] { model_config_from_json(Json::parse(R"({"d_model":"x"})")); },
                    ErrorKind::parse);
}

TEST(Embed, MatchesCompositionAndLayerNormContract) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 1);
  Rng rng(2);
  Tensor frames = random_tensor({6, c.input_dim()}, rng);
  Tape tape;
  BoundParameters b = bind(tape, p, false);
  Tensor got = embed(tape.constant(frames), b, c.layer_norm_epsilon).value();
  expect_close(got,
               oracle::layer_norm(oracle::relu(oracle::add_rows(
                                      oracle::mul(oracle::to_mat(frames), oracle::to_mat(p.embed_weight)),
                                      p.embed_bias)),
                                  p.embed_norm_gain, p.embed_norm_bias, c.layer_norm_epsilon),
               1e-12);

  // Unit gain and zero bias: rows are standardised.
  Parameters plain = init_parameters(c, rng);
  Tape t2;
  Tensor z = embed(t2.constant(frames), bind(t2, plain, false), 0.0).value();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) mean += z.at(r, j) / z.cols();
    for (std::size_t j = 0; j < z.cols(); ++j) var += (z.at(r, j) - mean) * (z.at(r, j) - mean) / z.cols();
    EXPECT_NEAR(mean, 0.0, 1e-10);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(Embed, ZeroWeightsGiveBiasRows) {
  ModelConfig c = toy_config();
  Rng rng(3);
  Parameters p = init_parameters(c, rng);
  for (double& x : p.embed_weight.data()) x = 0.0;
  p.embed_norm_bias = random_tensor({c.d_model}, rng);
  Tape tape;
  Tensor got = embed(tape.constant(random_tensor({3, c.input_dim()}, rng)), bind(tape, p, false), 1e-5).value();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < c.d_model; ++j) EXPECT_EQ(got.at(r, j), p.embed_norm_bias[j]);
}

TEST(Embed, RejectsWrongWidth) {
  ModelConfig c = toy_config();
  Rng rng(4);
  Parameters p = init_parameters(c, rng);
  Tape tape;
  expect_error_kind([&] { embed(tape.constant(Tensor({2, 15})), bind(tape, p, false), 1e-5); },
                    ErrorKind::shape);
}

TEST(PositionalEncoding, Examples) {
  auto zero = positional_encoding(0, 6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(zero[i], i % 2 == 0 ? 0.0 : 1.0);
  auto one = positional_encoding(1, 4);
  EXPECT_NEAR(one[0], 0.841471, 1e-6);
  EXPECT_NEAR(one[2], 0.0099998, 1e-7);
  expect_error_kind([] { positional_encoding(3, 5); }, ErrorKind::config);
}

TEST(PositionalEncoding, MatchesDirectEvaluation) {
  for (std::size_t d : {4u, 64u, 128u}) {
    Tensor table = positional_encoding_table(100, d);
    for (std::size_t pos = 0; pos < 100; ++pos)
      for (std::size_t i = 0; i < d; ++i)
        ASSERT_NEAR(table.at(pos, i), oracle::encoding(pos, i, d), 1e-12);
  }
}

TEST(Attention, Examples) {
  Tape tape;
  Var v = tape.constant(Tensor::matrix({{3, -1}}));
  EXPECT_EQ(attention(tape.constant(Tensor::matrix({{1, 2}})), tape.constant(Tensor::matrix({{5, 1}})), v)
                .value(),
            Tensor::matrix({{3, -1}}));

  // Zero queries: uniform weights, every output row is the column mean of V.
  Var values = tape.constant(Tensor::matrix({{1, 2}, {3, 4}, {8, 0}}));
  Tensor uniform = attention(tape.constant(Tensor({3, 2}, 0.0)),
                             tape.constant(Tensor::matrix({{1, 0}, {0, 1}, {1, 1}})), values)
                       .value();
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_NEAR(uniform.at(r, 0), 4.0, 1e-12);
    EXPECT_NEAR(uniform.at(r, 1), 2.0, 1e-12);
  }
  expect_error_kind([&] { attention(tape.constant(Tensor({3, 2})), tape.constant(Tensor({3, 3})), values); },
                    ErrorKind::shape);
}

TEST(Attention, MatchesHandRolledOracle) {
  Rng rng(5);
  Tensor q = random_tensor({3, 2}, rng), k = random_tensor({3, 2}, rng), v = random_tensor({3, 2}, rng);
  Tape tape;
  Tensor got = attention(tape.constant(q), tape.constant(k), tape.constant(v)).value();
  expect_close(got, oracle::attention(oracle::to_mat(q), oracle::to_mat(k), oracle::to_mat(v)), 1e-12);
}

TEST(MultiHead, IdentityProjectionsReduceToAttention) {
  ModelConfig c = toy_config();
  c.heads = 1;
  c.d_k = c.d_v = c.d_model;
  Rng rng(6);
  Parameters p = init_parameters(c, rng);
  LayerWeights<Tensor> w = p.layers[0];
  w.query[0] = w.key[0] = w.value[0] = w.output = Tensor::identity(c.d_model);
  Tensor x = random_tensor({5, c.d_model}, rng);
  Tape tape;
  Var xv = tape.constant(x);
  Tensor got = multi_head(xv, xv, xv, bind_layer(tape, w)).value();
  Tensor want = attention(xv, xv, xv).value();
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(MultiHead, MatchesPerHeadDecomposition) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 7);
  Rng rng(8);
  Tensor x = random_tensor({5, c.d_model}, rng);
  Tape tape;
  Var xv = tape.constant(x);
  expect_close(multi_head(xv, xv, xv, bind_layer(tape, p.layers[0])).value(),
               oracle::multi_head(oracle::to_mat(x), p.layers[0]), 1e-12);

  LayerWeights<Tensor> bad = p.layers[0];
  bad.output = Tensor({c.d_model + 1, c.d_model});
  expect_error_kind([&] { multi_head(xv, xv, xv, bind_layer(tape, bad)); }, ErrorKind::shape);
}

TEST(EncoderLayer, MatchesCompositionOracle) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 9);
  Rng rng(10);
  Tensor x = random_tensor({6, c.d_model}, rng);
  Tape tape;
  Tensor got = encoder_layer(tape.constant(x), bind_layer(tape, p.layers[1]), c.layer_norm_epsilon).value();
  EXPECT_EQ(got.shape(), x.shape());
  expect_close(got, oracle::encoder_layer(oracle::to_mat(x), p.layers[1], c.layer_norm_epsilon), 1e-12);
}

TEST(EncoderLayer, ZeroSublayersGiveDoubleLayerNorm) {
  ModelConfig c = toy_config();
  Rng rng(11);
  Parameters p = init_parameters(c, rng);
  LayerWeights<Tensor> w = p.layers[0];
  for (auto* t : {&w.output, &w.ffn_w1, &w.ffn_b1, &w.ffn_w2, &w.ffn_b2})
    for (double& e : t->data()) e = 0.0;
  Tensor x = random_tensor({4, c.d_model}, rng);
  Tape tape;
  Tensor got = encoder_layer(tape.constant(x), bind_layer(tape, w), 1e-5).value();
  Tensor ones({c.d_model}, 1.0), zeros({c.d_model}, 0.0);
  Tensor want = layer_norm(layer_norm(x, ones, zeros, 1e-5), ones, zeros, 1e-5);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Forward, MatchesReferenceNetworkAndBatching) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 12);
  Rng rng(13);
  Tensor a = random_tensor({4, c.input_dim()}, rng), b = random_tensor({4, c.input_dim()}, rng);
  Tensor out = forward(a, p, c);
  EXPECT_EQ(out.shape(), (Shape{4, c.output_dim()}));
  expect_close(out, oracle::forward(a, p, c), 1e-11);

  Tensor batch({2, 4, c.input_dim()});
  std::copy(a.data().begin(), a.data().end(), batch.data().begin());
  std::copy(b.data().begin(), b.data().end(), batch.data().begin() + a.size());
  Tensor both = forward(batch, p, c), second = forward(b, p, c);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(both[i], out[i], 1e-12);
    EXPECT_NEAR(both[out.size() + i], second[i], 1e-12);
  }
}

TEST(Forward, ShapeForAnyLengthAndDeterminism) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 14);
  Rng rng(15);
  for (std::size_t t : {1u, 2u, 4u, 9u, 33u}) {
    Tensor in = random_tensor({t, c.input_dim()}, rng);
    Tensor out = forward(in, p, c);
    EXPECT_EQ(out.shape(), (Shape{t, c.output_dim()}));
    EXPECT_EQ(out, forward(in, p, c));
  }
  expect_error_kind([&] { forward(Tensor({c.input_dim()}), p, c); }, ErrorKind::shape);
}

TEST(Forward, NonFiniteActivationNamesLayer) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 16);
  p.layers[0].ffn_b2[0] = std::numeric_limits<double>::infinity();
  Rng rng(17);
  try {
    forward(random_tensor({4, c.input_dim()}, rng), p, c);
    FAIL() << "expected numerical error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
}

TEST(Forward, PermutationEquivarianceWithoutPositionalEncoding) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 18);
  Rng rng(19);
  const std::size_t t = 7;
  Tensor in = random_tensor({t, c.input_dim()}, rng);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> perm(t);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = t - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Tensor permuted({t, c.input_dim()});
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < c.input_dim(); ++j) permuted.at(i, j) = in.at(perm[i], j);

    c.use_positional_encoding = false;
    Tensor base = forward(in, p, c), moved = forward(permuted, p, c);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < c.output_dim(); ++j)
        ASSERT_NEAR(moved.at(i, j), base.at(perm[i], j), 1e-10);

    c.use_positional_encoding = true;
    Tensor pe_base = forward(in, p, c), pe_moved = forward(permuted, p, c);
    double differs = 0.0;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < c.output_dim(); ++j)
        differs = std::max(differs, std::abs(pe_moved.at(i, j) - pe_base.at(perm[i], j)));
    const bool identity = std::is_sorted(perm.begin(), perm.end());
    if (!identity) EXPECT_GT(differs, 1e-6);
  }
}

TEST(Forward, GradientsMatchFiniteDifferences) {
  ModelConfig c = toy_config();
  Parameters p = jittered_parameters(c, 20);
  Rng rng(21);
  Tensor in = random_tensor({c.window, c.input_dim()}, rng);
  Tensor target = random_tensor({c.window, c.output_dim()}, rng);
  EXPECT_LT(oracle::model_gradient_check(in, target, p, c), 1e-4);
}

TEST(Parameters, ShapesNamesAndCount) {
  ModelConfig c = toy_config();
  Rng rng(22);
  Parameters p = init_parameters(c, rng);
  EXPECT_NO_THROW(check_parameters(p, c));
  auto flat = flatten(p);
  EXPECT_EQ(flat.front().name, "embed.weight");
  EXPECT_EQ(flat.back().name, "head.bias");
  // embed: 20*8 + 3*8; per layer: 3 heads-worth of 8x4 per head, W^O 8x8,
  // FFN 8*16+16+16*8+8, two norms 4*8; head 8*15+15.
  const std::size_t layer = 2 * 3 * 32 + 64 + (128 + 16 + 128 + 8) + 32;
  EXPECT_EQ(parameter_count(p), 160 + 24 + 2 * layer + 120 + 15);
  p.layers[1].ffn_w1 = Tensor({3, 3});
  expect_error_kind([&] { check_parameters(p, c); }, ErrorKind::shape);
}

TEST(Parameters, InitIsDeterministic) {
  ModelConfig c = toy_config();
  Rng a(5), b(5);
  EXPECT_EQ(flatten(init_parameters(c, a))[0].value, flatten(init_parameters(c, b))[0].value);
  Model m1 = make_model(c, KinematicTree({-1, 0, 1, 2, 3}, 0), 9);
  Model m2 = make_model(c, KinematicTree({-1, 0, 1, 2, 3}, 0), 9);
  EXPECT_EQ(flatten(m1.params).back().value, flatten(m2.params).back().value);
  expect_error_kind([&] { make_model(c, KinematicTree({-1, 0}, 0), 9); }, ErrorKind::structural);
}

TEST(ModelFile, RoundTripIsBitExact) {
  ModelConfig c = toy_config();
  Model m = make_model(c, KinematicTree({-1, 0, 1, 2, 3}, 0), 3);
  m.params = jittered_parameters(c, 4);
  const auto path = std::filesystem::temp_directory_path() / "skeletor_model_roundtrip.bin";
  save_model(path, m);
  Model back = load_model(path);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.tree, m.tree);
  auto a = flatten(m.params), b = flatten(back.params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(std::memcmp(a[i].value.data().data(), b[i].value.data().data(),
                          a[i].value.size() * sizeof(double)),
              0);
  }
}

TEST(FrameCodec, EncodeDecode) {
  SkeletonSequence seq;
  seq.frames.push_back({{{1, 2, 3}, {4, 5, 6}}, {0.5, 0.25}});
  Tensor rows = encode_frames(seq, true);
  EXPECT_EQ(rows, Tensor::matrix({{1, 2, 3, 4, 5, 6, 0.5, 0.25}}));
  EXPECT_EQ(encode_targets(seq), Tensor::matrix({{1, 2, 3, 4, 5, 6}}));
  decode_frames(Tensor::matrix({{0, 0, 1, 9, 9, 9}}), seq);
  EXPECT_EQ(seq.frames[0].joints[1], (Joint3D{9, 9, 9}));
  EXPECT_EQ(seq.frames[0].confidences[1], 0.25);
  expect_error_kind([&] { decode_frames(Tensor({1, 5}), seq); }, ErrorKind::shape);
}

}  // namespace
}  // namespace skeletor
