mod common;

use common::fd;

#[test]
fn analytic_gradients_match_central_differences() {
    for (name, cfg) in fd::all_configs() {
        let c = fd::check(cfg);
        assert!(c.coordinates > 0);
        assert!(
            c.max_rel_err < 1e-5,
            "{name}: relative error {:e} at {:?}",
            c.max_rel_err,
            c.worst
        );
    }
}
