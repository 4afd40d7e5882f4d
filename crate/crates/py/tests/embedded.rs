use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(ttstar::ttstar)(py);
        let g = PyDict::new(py);
        g.set_item("ttstar", m).unwrap();
        if let Err(e) = py.run(code, Some(&g), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn spectrum_and_braids() {
    run(c"
import math
u = ttstar.Spectrum.roots_of_unity(3)
assert len(u) == 3 and u.is_admissibly_ordered() and u.is_pd()
assert abs(u.delta() - math.pi / 6) < 1e-12
assert u.crossing_sequence(2 * math.pi) == [2, 1, 2, 1, 2, 1]
s = ttstar.StokesMatrix([[1, -1, 0], [0, 1, -1], [0, 0, 1]])
assert s == ttstar.cartan_seed('A3')
t = s.apply_word([1, 2, [1, -1, 1]])
assert t.apply_word([[1, -1, 1], -2, -1]) == s
assert s.orbit_search(t, 3) is not None
typ, w = t.detect_ade(4, False)
assert typ == 'A3' and t.apply_word(w).entries() == s.entries()
assert ttstar.StokesMatrix([[1, '1/2'], [0, 1]]).entries()[0][1] == '1/2'
try:
    ttstar.StokesMatrix([[1, 0], [2, 1]])
    raise AssertionError('accepted lower entry')
except ValueError:
    pass
");
}

#[test]
fn certify_and_minimize() {
    run(c"
r = ttstar.certify(ttstar.Spectrum([1, -1]), ttstar.StokesMatrix([[1, -3], [0, 1]]))
assert r['verdict'] == 'Refuted' and not r['certified']
r = ttstar.certify(ttstar.Spectrum.roots_of_unity(3), ttstar.cartan_seed('A3'))
assert r['certified']
m, arg, boundary = ttstar.f_minimize('E6', 0.1)
assert m == 3.0 and boundary and len(arg) == 6
");
}

#[test]
fn solve_and_verify() {
    run(c"
u = ttstar.Spectrum.roots_of_unity(3)
s = ttstar.cartan_seed('A3')
c = ttstar.solve(u, s, ttstar.log_grid(0.6, 2.0, 5))
assert len(c) == 5
d = c.diagnostics(2)
assert d['jump_residual'] < 1e-8 and d['cholesky_ok']
g = c.g(0)
assert abs(g[0][1] - g[1][0].conjugate()) < 1e-10
rep = c.verify([0.6, 2.0], s)
assert rep['pass'] and rep['deviation'] < 1e-6
");
}
