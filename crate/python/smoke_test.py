"""Quick check that the extension module loads and agrees with the CLI numbers."""

from fractions import Fraction

import medr


def main():
    config, bids = medr.published_instance(5)
    assert config.target == 68 and config.alpha == "180" and config.gamma == "1.6"
    assert len(bids) == 9 and bids[6] == medr.Bid("tenant7", 43, 3569)

    exact = medr.dopt_solve(config, bids)
    assert exact.winners == ["tenant7"], exact
    assert exact.social_cost == "3569"
    assert medr.brute_force_solve(config, bids).social_cost == exact.social_cost

    approx = medr.fptas_solve(config, bids)
    ratio = Fraction(approx.social_cost) / Fraction(exact.social_cost)
    assert 1 <= ratio <= Fraction(3, 2), ratio

    assert medr.critical_payment(config, bids, "tenant7", "dopt") == 4484
    outcome = medr.run_mechanism(config, bids, "fptas")
    payments = dict(outcome.payments)
    assert payments["tenant7"] >= 3569 and payments["tenant1"] == 0
    assert outcome.to_json().startswith('{"allocator":"fptas"')

    pure_bes = medr.allocate(medr.AuctionConfig(68, Fraction(180)), [], "bes")
    assert pure_bes.social_cost == "12240" and pure_bes.bes_usage == "68"

    assert medr.generate_bids(5, 42) == medr.generate_bids(5, 42)
    assert medr.sweep_csv("alpha").startswith("hour,alpha,gamma")

    for bad in (lambda: medr.AuctionConfig(68, 180, "0.5"),
                lambda: medr.dopt_solve(config, [medr.Bid("x", -1, 5)]),
                lambda: medr.published_instance(3)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
