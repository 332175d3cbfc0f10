#include <catch2/catch_amalgamated.hpp>

#include <fieldcov/rng.hpp>

using namespace fieldcov;

TEST_CASE("identical keys give identical streams") {
    RngStream a(42, 3, 7), b(42, 3, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.engine()() == b.engine()());
}

TEST_CASE("any key component separates streams") {
    RngStream base(42, 3, 7);
    RngStream other_master(43, 3, 7);
    RngStream other_rep(42, 4, 7);
    RngStream other_purpose(42, 3, 8);
    bool dm = false, dr = false, dp = false;
    RngStream b1(42, 3, 7), b2(42, 3, 7), b3(42, 3, 7);
    for (int i = 0; i < 16; ++i) {
        dm |= b1.engine()() != other_master.engine()();
        dr |= b2.engine()() != other_rep.engine()();
        dp |= b3.engine()() != other_purpose.engine()();
    }
    CHECK(dm);
    CHECK(dr);
    CHECK(dp);
}

TEST_CASE("derived streams are independent of draw order") {
    RngStream parent(99, 1, 0);
    parent.uniform();
    parent.uniform();
    RngStream sub_after = parent.substream(5);
    RngStream sub_direct = RngStream(99, 1, 5);
    for (int i = 0; i < 20; ++i)
        CHECK(sub_after.engine()() == sub_direct.engine()());
    RngStream rep = parent.replicate(12);
    RngStream rep_direct(99, 12, 0);
    for (int i = 0; i < 20; ++i)
        CHECK(rep.engine()() == rep_direct.engine()());
}

TEST_CASE("uniform and index stay in range") {
    RngStream r(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const auto k = r.index(13);
        CHECK(k < 13);
    }
}
