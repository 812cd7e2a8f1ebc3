#include <doctest.h>

#include <set>

#include "coogan/cooperation.hpp"

using namespace coogan;

namespace {

ImageTensor random_image(Rng& rng, i64 c, i64 size) {
    Tensor t({c, size, size});
    for (i64 i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return ImageTensor(std::move(t));
}

bool images_equal(const ImageTensor& a, const ImageTensor& b) {
    if (!a.data.same_shape(b.data)) return false;
    for (i64 i = 0; i < a.data.numel(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("downsample 768 -> 256 shrinks each side 3x; constants survive resampling") {
    ImageTensor img(Tensor::full({3, 768, 768}, 0.25));
    ImageTensor small = downsample(img, 256);
    CHECK(small.height() == 256);
    CHECK(small.width() == 256);
    for (i64 i = 0; i < small.data.numel(); ++i) CHECK(small.data[i] == doctest::Approx(0.25));

    ImageTensor tiny(Tensor::full({3, 16, 16}, -0.5));
    ImageTensor round = downsample(upsample(tiny, 48), 16);
    for (i64 i = 0; i < round.data.numel(); ++i)
        CHECK(std::abs(round.data[i] + 0.5) < 1e-6);
}

TEST_CASE("upsample mirrors downsample's contract") {
    ImageTensor img(Tensor::full({3, 256, 256}, 0.75));
    ImageTensor big = upsample(img, 768);
    CHECK(big.height() == 768);
    for (i64 i = 0; i < 100; ++i) CHECK(big.data[i * 997 % big.data.numel()] == doctest::Approx(0.75));
    CHECK_THROWS_AS(upsample(img, 128), dimension_error);
    CHECK_THROWS_AS(downsample(img, 512), dimension_error);
}

TEST_CASE("decompose counts and ordering") {
    SUBCASE("768 with s=128 gives 36 patches") {
        ImageTensor img(Tensor({3, 768, 768}));
        auto ps = decompose(img, 128);
        CHECK(ps.size() == 36);
        CHECK(ps.front().first.row == 0);
        CHECK(ps.front().first.col == 0);
        CHECK(ps[1].first.col == 1);  // row-major
        CHECK(ps.back().first.row == 5);
        CHECK(ps.back().first.col == 5);
    }
    SUBCASE("4x4 with s=2: top-left patch equals the slice") {
        Rng rng(1);
        ImageTensor img = random_image(rng, 3, 4);
        auto ps = decompose(img, 2);
        CHECK(ps.size() == 4);
        for (i64 c = 0; c < 3; ++c)
            for (i64 y = 0; y < 2; ++y)
                for (i64 x = 0; x < 2; ++x)
                    CHECK(ps[0].second.data[(c * 2 + y) * 2 + x] == img.data[(c * 4 + y) * 4 + x]);
    }
    SUBCASE("patch equal to the full size is the identity tiling") {
        Rng rng(2);
        ImageTensor img = random_image(rng, 3, 8);
        auto ps = decompose(img, 8);
        REQUIRE(ps.size() == 1);
        CHECK(images_equal(ps[0].second, img));
    }
    SUBCASE("non-divisible size errors, no silent padding") {
        ImageTensor img(Tensor({3, 10, 10}));
        CHECK_THROWS_AS(decompose(img, 4), tiling_error);
    }
}

TEST_CASE("assemble is the exact inverse of decompose") {
    Rng rng(3);
    ImageTensor img = random_image(rng, 3, 24);
    auto ps = decompose(img, 8);
    CHECK(images_equal(assemble(ps, 24), img));

    SUBCASE("permuted patch order assembles identically") {
        rng.shuffle(ps);
        CHECK(images_equal(assemble(ps, 24), img));
    }
    SUBCASE("omitting a patch errors") {
        ps.pop_back();
        CHECK_THROWS_AS(assemble(ps, 24), tiling_error);
    }
    SUBCASE("duplicate coordinates error") {
        ps[1] = ps[0];
        CHECK_THROWS_AS(assemble(ps, 24), tiling_error);
    }
}

TEST_CASE("tiling property: 200+ random divisible pairs round-trip bit-exactly") {
    Rng rng(4);
    int done = 0;
    while (done < 210) {
        const i64 patch = 1 + static_cast<i64>(rng.below(12));
        const i64 grid = 1 + static_cast<i64>(rng.below(6));
        const i64 size = patch * grid;
        ImageTensor img = random_image(rng, rng.bernoulli(0.5) ? 3 : 6, size);
        auto ps = decompose(img, patch);
        CHECK(ps.size() == static_cast<size_t>(grid * grid));
        CHECK(images_equal(assemble(ps, size), img));
        ++done;
    }
    // non-divisible sizes raise tiling errors
    for (int i = 0; i < 20; ++i) {
        const i64 patch = 2 + static_cast<i64>(rng.below(10));
        const i64 size = patch * (1 + static_cast<i64>(rng.below(4))) + 1;
        ImageTensor img(Tensor({3, size, size}));
        CHECK_THROWS_AS(decompose(img, patch), tiling_error);
    }
}

TEST_CASE("make_local_inputs pairs coordinates and stacks channels") {
    Rng rng(5);
    ImageTensor hr = random_image(rng, 3, 64);
    ImageTensor snap = random_image(rng, 3, 32);
    auto inputs = make_local_inputs(hr, snap, 16);
    CHECK(inputs.size() == 16);
    ImageTensor up = upsample(snap, 64);
    auto up_patches = decompose(up, 16);
    auto hr_patches = decompose(hr, 16);
    for (size_t i = 0; i < inputs.size(); ++i) {
        const auto& six = inputs[i].second;
        CHECK(six.channels() == 6);
        // channels 0-2 are the HR patch, channels 3-5 the snapshot patch
        for (i64 j = 0; j < 3 * 16 * 16; ++j) {
            CHECK(six.data[j] == hr_patches[i].second.data[j]);
            CHECK(six.data[3 * 16 * 16 + j] == up_patches[i].second.data[j]);
        }
    }
}

TEST_CASE("make_local_inputs: 768 HR + 256 snapshot at s=128 gives 36 six-channel patches") {
    ImageTensor hr(Tensor::full({3, 768, 768}, 0.5));
    ImageTensor snap(Tensor::full({3, 256, 256}, 0.5));
    auto inputs = make_local_inputs(hr, snap, 128);
    CHECK(inputs.size() == 36);
    CHECK(inputs[0].second.channels() == 6);
    CHECK(inputs[0].second.height() == 128);
    // constant image: snapshot channels equal HR channels after resampling
    for (i64 j = 0; j < 3 * 128 * 128; ++j)
        CHECK(inputs[7].second.data[j] ==
              doctest::Approx(inputs[7].second.data[3 * 128 * 128 + j]));
}

TEST_CASE("edit_full_image with identity stubs reproduces the input") {
    Rng rng(6);
    RunConfig cfg;
    cfg.global_size = 16;
    cfg.patch_size = 16;
    cfg.hr_size = 48;
    cfg.n_attributes = 3;
    ImageTensor hr = random_image(rng, 3, 48);
    TranslateFn identity = [](const ImageTensor& x, const DiffVector&) {
        if (x.channels() == 6)
            return ImageTensor(Tensor::from({3, x.height(), x.width()},
                                            std::vector<double>(x.data.data(),
                                                                x.data.data() + 3 * x.height() * x.width())),
                               x.range_lo, x.range_hi);
        return x;
    };
    ImageTensor out = edit_full_image(hr, identity, identity, DiffVector::zeros(3), cfg);
    CHECK(images_equal(out, hr));
    CHECK(out.height() == 48);
}

TEST_CASE("sequential and reordered patch execution give identical outputs") {
    RunConfig cfg;
    cfg.global_size = 16;
    cfg.patch_size = 16;
    cfg.hr_size = 32;
    cfg.n_attributes = 3;
    GeneratorSpec gs;
    gs.n_layers = 2;
    gs.base_channels = 4;
    gs.skip_mode = SkipMode::lstu;
    gs.skip_count = 1;
    gs.n_attributes = 3;
    Generator gg = Generator::build(gs, 31);
    GeneratorSpec ls = gs;
    ls.input_channels = 6;
    Generator gl = Generator::build(ls, 32);

    Rng rng(7);
    ImageTensor hr = random_image(rng, 3, 32);
    DiffVector d{{1, 0, -1}};
    ImageTensor seq = edit_full_image(hr, gg, gl, d, cfg, false);
    ImageTensor par = edit_full_image(hr, gg, gl, d, cfg, true);
    ImageTensor seq2 = edit_full_image(hr, gg, gl, d, cfg, false);
    CHECK(images_equal(seq, par));
    CHECK(images_equal(seq, seq2));  // deterministic
}

TEST_CASE("local generator graph at patch size never touches larger activations") {
    GeneratorSpec ls;
    ls.n_layers = 3;
    ls.base_channels = 4;
    ls.input_channels = 6;
    ls.skip_mode = SkipMode::lstu;
    ls.skip_count = 2;
    ls.n_attributes = 3;
    Generator gl = Generator::build(ls, 9);
    Rng rng(8);
    Tensor patch({1, 6, 16, 16});
    for (i64 i = 0; i < patch.numel(); ++i) patch[i] = rng.uniform(-1, 1);
    ad::Var x = ad::leaf(std::move(patch), true);
    ad::Var y = gl.forward(x, ad::constant(Tensor({1, 3})));
    // walk the graph; every intermediate activation must be <= 16x16
    std::vector<ad::Node*> stack{y.node().get()};
    std::set<ad::Node*> seen{y.node().get()};
    i64 max_side = 0;
    while (!stack.empty()) {
        ad::Node* n = stack.back();
        stack.pop_back();
        if (n->value.ndim() == 4) max_side = std::max(max_side, n->value.dim(2));
        for (const auto& p : n->parents)
            if (p.defined() && seen.insert(p.node().get()).second) stack.push_back(p.node().get());
    }
    CHECK(max_side <= 16);
}
