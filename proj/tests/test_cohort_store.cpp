#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "ganorm/common.hpp"
#include "ganorm/manifest.hpp"
#include "ganorm/montage.hpp"
#include "ganorm/tensor.hpp"
#include "oracles.hpp"

using namespace ganorm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("ganorm_store_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool tensors_bitwise_equal(const CrossSpectrumTensor& a, const CrossSpectrumTensor& b) {
    if (a.channels() != b.channels() || a.frequencies() != b.frequencies()) return false;
    for (std::size_t f = 0; f < a.frequencies(); ++f)
        if (std::memcmp(a.data[f].data(), b.data[f].data(),
                        sizeof(std::complex<double>) * a.data[f].size()) != 0)
            return false;
    return true;
}

}  // namespace

TEST_CASE("standard montage lists the 19 channels in order") {
    auto m = ChannelMontage::standard_10_20();
    REQUIRE(m.count() == 19);
    CHECK(m.names.front() == "Fp1");
    CHECK(m.names[1] == "Fp2");
    CHECK(m.names.back() == "Pz");
    CHECK_NOTHROW(m.validate());

    m.names.push_back("Fp1");
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("standard grid spans 1.17 to 19.11 Hz in 47 steps") {
    auto g = FrequencyGrid::standard();
    CHECK(g.start_hz == doctest::Approx(1.17));
    CHECK(g.step_hz == doctest::Approx(0.39));
    REQUIRE(g.count == 47);
    CHECK(g.freq(0) == doctest::Approx(1.17));
    CHECK(g.freq(46) == doctest::Approx(19.11).epsilon(1e-12));
    CHECK(g.freqs().size() == 47);
    CHECK_NOTHROW(g.validate());

    FrequencyGrid bad{1.0, -0.5, 10};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("the four bands partition the standard grid 6/12/11/18") {
    auto g = FrequencyGrid::standard();
    auto bands = BandDefinition::standard_four();
    REQUIRE(bands.size() == 4);

    std::vector<std::size_t> sizes;
    std::vector<char> covered(g.count, 0);
    for (const auto& b : bands) {
        auto idx = b.grid_indices(g);
        sizes.push_back(idx.size());
        for (std::size_t k : idx) {
            CHECK(covered[k] == 0);  // disjoint
            covered[k] = 1;
        }
        // Contiguous run.
        for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] == idx[i - 1] + 1);
    }
    CHECK(sizes == std::vector<std::size_t>{6, 12, 11, 18});
    for (char c : covered) CHECK(c == 1);  // complete cover
}

TEST_CASE("band membership uses half-step tolerance at the edges") {
    auto g = FrequencyGrid::standard();
    auto delta = BandDefinition::of(BandName::delta);
    auto theta = BandDefinition::of(BandName::theta);
    // 3.12 Hz is the 6th grid point: inside delta's upper fringe, below theta's lower fringe.
    double f5 = g.freq(5);
    CHECK(f5 == doctest::Approx(3.12).epsilon(1e-12));
    CHECK(delta.contains(f5, g.step_hz));
    CHECK_FALSE(theta.contains(f5, g.step_hz));
}

TEST_CASE("band names round-trip through strings") {
    for (BandName b : {BandName::delta, BandName::theta, BandName::alpha, BandName::beta})
        CHECK(band_name_from_str(band_name_str(b)) == b);
    CHECK_THROWS_AS(band_name_from_str("gamma"), Error);
}

TEST_CASE("tensor binary round trip is bit exact") {
    auto dir = temp_dir("roundtrip");
    Rng rng(17);
    auto t = oracle::random_tensor(6, 5, rng);
    std::string path = (dir / "t.bin").string();
    save_tensor(t, path);
    auto back = load_tensor(path);

    // The binary carries dimensions only; names are placeholders until a
    // manifest supplies the montage.
    CHECK(back.montage.count() == t.montage.count());
    CHECK(back.grid.start_hz == t.grid.start_hz);
    CHECK(back.grid.step_hz == t.grid.step_hz);
    CHECK(back.grid.count == t.grid.count);
    CHECK(tensors_bitwise_equal(t, back));

    // Re-saving the loaded tensor reproduces the file byte for byte.
    std::string path2 = (dir / "t2.bin").string();
    save_tensor(back, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK(!b1.empty());
}

TEST_CASE("corrupt tensor files are rejected") {
    auto dir = temp_dir("corrupt");
    Rng rng(18);
    auto t = oracle::random_tensor(4, 3, rng);
    std::string path = (dir / "t.bin").string();
    save_tensor(t, path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_tensor(path), Error);
    }
    SUBCASE("truncated payload") {
        fs::resize_file(path, fs::file_size(path) - 16);
        CHECK_THROWS_AS(load_tensor(path), Error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_tensor((dir / "nope.bin").string()), Error);
    }
}

TEST_CASE("tensor validation flags each violation class") {
    Rng rng(19);
    auto good = oracle::random_tensor(5, 4, rng);
    CHECK(validate_tensor(good).empty());

    SUBCASE("broken Hermitian symmetry") {
        auto t = good;
        t.data[1](0, 1) += std::complex<double>(0.5, 0.0);
        auto v = validate_tensor(t);
        CHECK(!v.empty());
    }
    SUBCASE("negative diagonal power") {
        auto t = good;
        t.data[2](3, 3) = -1.0;
        CHECK(!validate_tensor(t).empty());
    }
    SUBCASE("indefinite matrix") {
        auto t = good;
        // Make one frequency strongly non-PSD while keeping it Hermitian.
        t.data[0] = -t.data[0];
        auto fixed = t.data[0];
        for (Eigen::Index i = 0; i < fixed.rows(); ++i) fixed(i, i) = std::abs(fixed(i, i));
        t.data[0] = fixed;
        CHECK(!validate_tensor(t).empty());
    }
}

TEST_CASE("band slice keeps the right frequencies") {
    Rng rng(20);
    CrossSpectrumTensor t;
    t.montage = ChannelMontage::standard_10_20();
    t.grid = FrequencyGrid::standard();
    auto r = oracle::random_tensor(19, 47, rng);
    t.data = r.data;

    auto alpha = BandDefinition::of(BandName::alpha);
    auto sliced = band_slice(t, alpha);
    auto idx = alpha.grid_indices(t.grid);
    REQUIRE(sliced.frequencies() == idx.size());
    CHECK(sliced.grid.start_hz == doctest::Approx(t.grid.freq(idx.front())));
    for (std::size_t k = 0; k < idx.size(); ++k)
        CHECK((sliced.data[k] - t.data[idx[k]]).norm() == 0.0);
}

TEST_CASE("manifest save and load round trip") {
    auto dir = temp_dir("manifest");
    fs::create_directories(dir / "tensors");
    Rng rng(21);

    DatasetManifest m;
    m.montage.names = {"A", "B", "C", "D"};
    m.grid = {2.0, 1.0, 3};
    m.notes = "round trip fixture";
    for (int i = 0; i < 3; ++i) {
        SubjectRecord s;
        s.subject_id = "subj-" + std::to_string(i);
        s.age = 10.0 + 7.3 * i;
        s.site = i % 2 == 0 ? "site1" : "site2";
        s.sex = i == 0 ? Sex::female : (i == 1 ? Sex::male : Sex::unknown);
        s.tensor_path = "tensors/subj" + std::to_string(i) + ".bin";
        auto t = oracle::random_tensor(4, 3, rng);
        t.grid = m.grid;
        save_tensor(t, (dir / s.tensor_path).string());
        m.subjects.push_back(s);
    }
    std::string mpath = (dir / "manifest.json").string();
    save_dataset(m, mpath);

    auto back = load_dataset(mpath);
    CHECK(back.montage.names == m.montage.names);
    CHECK(back.grid.count == 3);
    CHECK(back.notes == m.notes);
    REQUIRE(back.subjects.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.subjects[i].subject_id == m.subjects[i].subject_id);
        CHECK(back.subjects[i].age == m.subjects[i].age);
        CHECK(back.subjects[i].site == m.subjects[i].site);
        CHECK(back.subjects[i].sex == m.subjects[i].sex);
    }
    CHECK(back.base_dir == dir.string());

    auto t0 = load_subject_tensor(back, back.subjects[0]);
    CHECK(t0.channels() == 4);
    CHECK(t0.montage.names == m.montage.names);
}

TEST_CASE("duplicate subject ids are a structural error") {
    auto dir = temp_dir("dups");
    fs::create_directories(dir / "tensors");
    Rng rng(22);
    DatasetManifest m;
    m.montage.names = {"A", "B", "C"};
    m.grid = {1.0, 1.0, 2};
    for (int i = 0; i < 2; ++i) {
        SubjectRecord s;
        s.subject_id = "same";
        s.age = 30;
        s.tensor_path = "tensors/t" + std::to_string(i) + ".bin";
        auto t = oracle::random_tensor(3, 2, rng);
        t.grid = m.grid;
        save_tensor(t, (dir / s.tensor_path).string());
        m.subjects.push_back(s);
    }
    std::string mpath = (dir / "manifest.json").string();
    save_dataset(m, mpath);
    std::vector<ManifestIssue> issues;
    CHECK_THROWS_AS(load_dataset(mpath, &issues), Error);
}

TEST_CASE("per-subject findings are collected instead of thrown when asked") {
    auto dir = temp_dir("issues");
    fs::create_directories(dir / "tensors");
    Rng rng(23);
    DatasetManifest m;
    m.montage.names = {"A", "B", "C"};
    m.grid = {1.0, 1.0, 2};

    SubjectRecord ok;
    ok.subject_id = "good";
    ok.age = 25;
    ok.tensor_path = "tensors/good.bin";
    auto t = oracle::random_tensor(3, 2, rng);
    t.grid = m.grid;
    save_tensor(t, (dir / ok.tensor_path).string());
    m.subjects.push_back(ok);

    SubjectRecord missing;
    missing.subject_id = "gone";
    missing.age = 40;
    missing.tensor_path = "tensors/gone.bin";
    m.subjects.push_back(missing);

    SubjectRecord wrong;
    wrong.subject_id = "narrow";
    wrong.age = 50;
    wrong.tensor_path = "tensors/narrow.bin";
    auto t2 = oracle::random_tensor(2, 2, rng);  // dimension mismatch
    t2.grid = m.grid;
    save_tensor(t2, (dir / wrong.tensor_path).string());
    m.subjects.push_back(wrong);

    std::string mpath = (dir / "manifest.json").string();
    save_dataset(m, mpath);

    std::vector<ManifestIssue> issues;
    auto back = load_dataset(mpath, &issues);
    CHECK(back.subjects.size() == 3);
    REQUIRE(issues.size() == 2);
    CHECK(issues[0].subject_id == "gone");
    CHECK(issues[1].subject_id == "narrow");

    // Strict mode throws on the first finding.
    CHECK_THROWS_AS(load_dataset(mpath), Error);
}

TEST_CASE("subject ages outside (0, 130) are rejected") {
    SubjectRecord s;
    s.subject_id = "x";
    s.tensor_path = "t.bin";
    s.age = 0.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s.age = 131.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s.age = 64.0;
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("CSV tensor import reads interleaved real and imaginary parts") {
    auto dir = temp_dir("csv");
    ChannelMontage mont;
    mont.names = {"A", "B"};
    FrequencyGrid grid{1.0, 0.5, 2};

    // Each row: re(0,0), im(0,0), re(0,1), im(0,1), re(1,0), im(1,0), re(1,1), im(1,1)
    std::ofstream out(dir / "t.csv");
    out << "4.0,0.0,1.0,0.5,1.0,-0.5,3.0,0.0\n";
    out << "2.0,0.0,0.25,-0.125,0.25,0.125,5.0,0.0\n";
    out.close();

    auto t = import_tensor_csv((dir / "t.csv").string(), mont, grid);
    REQUIRE(t.frequencies() == 2);
    CHECK(t.data[0](0, 0) == std::complex<double>(4.0, 0.0));
    CHECK(t.data[0](0, 1) == std::complex<double>(1.0, 0.5));
    CHECK(t.data[0](1, 0) == std::complex<double>(1.0, -0.5));
    CHECK(t.data[1](1, 1) == std::complex<double>(5.0, 0.0));
    CHECK(validate_tensor(t).empty());

    std::ofstream bad(dir / "bad.csv");
    bad << "1.0,0.0\n";
    bad.close();
    CHECK_THROWS_AS(import_tensor_csv((dir / "bad.csv").string(), mont, grid), Error);
}
