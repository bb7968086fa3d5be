#!/usr/bin/env python3
"""Regenerate the vendored FCIDUMP fixtures under crates/core/fixtures.

Requires PySCF. Orbitals are canonical RHF molecular orbitals; active spaces
are built with CASCI so that frozen-core contributions are folded into the
core energy and one-electron integrals.

    python3 scripts/gen_fixtures.py
"""
from pathlib import Path

from pyscf import ao2mo, gto, mcscf, scf
from pyscf.tools import fcidump

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"


def write(name, atom, basis, ncas=None, nelecas=None):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    ncas = ncas or mf.mo_coeff.shape[1]
    nelecas = nelecas or mol.nelectron
    mc = mcscf.CASCI(mf, ncas, nelecas)
    h1, ecore = mc.get_h1eff()
    h2 = ao2mo.restore(1, mc.get_h2eff(), ncas)
    path = OUT / f"{name}.fcidump"
    fcidump.from_integrals(str(path), h1, h2, ncas, nelecas, ecore, ms=0, tol=1e-14)
    print(f"{path.name}: norb={ncas} nelec={nelecas} e_rhf={mf.e_tot:.10f}")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    # H2 / STO-3G, R = 0.735 A, all orbitals.
    write("h2_sto3g", "H 0 0 0; H 0 0 0.735", "sto-3g")
    # HCl / STO-6G, R = 1.2 A, all 10 orbitals, 18 electrons.
    write("hcl_sto6g", "H 0 0 0; Cl 0 0 1.2", "sto-6g")
    # LiH / 6-31G, R = 1.5 A, lowest 10 of 11 orbitals, all 4 electrons.
    write("lih_631g", "Li 0 0 0; H 0 0 1.5", "6-31g", ncas=10, nelecas=4)
    # N2 / 6-31G, R = 1.1 A, frozen 1s cores, 8 active orbitals, 10 electrons.
    write("n2_631g_fc", "N 0 0 0; N 0 0 1.1", "6-31g", ncas=8, nelecas=10)
