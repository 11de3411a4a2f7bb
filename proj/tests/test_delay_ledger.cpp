#include "asgd/delay_ledger.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace asgd;

TEST_CASE("single worker always has delay one")
{
    DelayLedger ledger(1);
    for (Iteration k = 1; k <= 5; ++k)
    {
        const Arrival a = ledger.record_arrival(0);
        CHECK(a.k == k);
        CHECK(a.tau == 1);
        CHECK(a.prev == k - 1);
    }
}

TEST_CASE("two-worker round robin")
{
    DelayLedger ledger(2);
    const Iteration expected[] = {1, 2, 2, 2};
    for (int i = 0; i < 4; ++i)
    {
        CHECK(ledger.record_arrival(i % 2).tau == expected[i]);
    }
    CHECK(ledger.arrivals() == 4);
}

TEST_CASE("in-flight delay")
{
    DelayLedger ledger(3);
    // [A, B, A, C]
    ledger.record_arrival(0);
    ledger.record_arrival(1);
    ledger.record_arrival(0);
    CHECK(ledger.tau_of_inflight(2, 4) == 4);
    CHECK(ledger.tau_of_inflight(0, 4) == 1);
    CHECK(ledger.record_arrival(2).tau == 4);

    SUBCASE("idle worker ages by one per foreign arrival")
    {
        const Iteration before = ledger.tau_of_inflight(1, ledger.arrivals() + 1);
        for (int j = 1; j <= 6; ++j)
        {
            ledger.record_arrival(j % 2 == 0 ? 0 : 2);
            CHECK(ledger.tau_of_inflight(1, ledger.arrivals() + 1) == before + j);
        }
    }
}

TEST_CASE("terminal delay")
{
    DelayLedger ledger(2);
    for (int i = 0; i < 7; ++i)
        ledger.record_arrival(0);
    // worker 0 re-dispatched at 7, worker 1 still at 0
    CHECK(ledger.tau_terminal(0, 10) == 3);
    CHECK(ledger.tau_terminal(0, 7) == 1);
    CHECK(ledger.tau_terminal(1, 10) == 10);
}

TEST_CASE("unknown worker is a contract violation")
{
    DelayLedger ledger(2);
    CHECK_THROWS_AS(ledger.record_arrival(2), ContractViolation);
    CHECK_THROWS_AS(ledger.record_arrival(-1), ContractViolation);
    CHECK_THROWS_AS(ledger.dispatch_iter(5), ContractViolation);
    CHECK_THROWS_AS(DelayLedger(0), ContractViolation);
}

TEST_CASE("history and csv")
{
    DelayLedger ledger(2);
    ledger.record_arrival(1);
    ledger.record_arrival(1);
    ledger.record_arrival(0);
    const auto h = ledger.history();
    REQUIRE(h.size() == 3);
    CHECK(h[2] == LedgerEntry{3, 0, 0});
    CHECK(h[2].tau() == 3);
    std::ostringstream out;
    ledger.write_csv(out);
    CHECK(out.str() == "k,worker,prev,tau\n1,1,0,1\n2,1,1,1\n3,0,0,3\n");
}

TEST_CASE("delay budget holds on random orders and is tight")
{
    std::mt19937_64 rng(3);
    for (int M : {1, 2, 3, 7})
    {
        DelayLedger ledger(M);
        std::uniform_int_distribution<int> pick(0, M - 1);
        for (int k = 0; k < 300; ++k)
            ledger.record_arrival(pick(rng));
        const auto report = check_delay_budget(ledger.history(), M);
        CHECK(report.holds);
        CHECK(report.min_slack >= 0);
        CHECK(check_large_delay_fraction(ledger.history(), M).holds);
    }
    // Round robin meets the budget with equality at every full cycle.
    DelayLedger rr(3);
    for (int k = 0; k < 30; ++k)
        rr.record_arrival(k % 3);
    CHECK(check_delay_budget(rr.history(), 3).min_slack == 0);
}

TEST_CASE("budget check detects a corrupted history")
{
    std::vector<LedgerEntry> bogus{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_FALSE(check_delay_budget(bogus, 1).holds);
}
