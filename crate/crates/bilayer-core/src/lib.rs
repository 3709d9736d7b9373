//! Core algorithms for a spin-1/2 bilayer with ferromagnetic intra-layer
//! Ising couplings and antiferromagnetic inter-layer Heisenberg couplings:
//! lattice geometry, a stochastic series expansion engine with a joint
//! Ising/Heisenberg cluster update, thermodynamic and correlation
//! estimators, a replica manifold for entanglement-Hamiltonian
//! correlators, an exact-diagonalization cross-check, and finite-size
//! scaling analysis.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of the default `std` to build without the standard
//! library. File formats, threading, and the command-line driver live in
//! the companion `bilayer-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ed;
pub mod estimators;
pub mod fss;
pub mod lattice;
pub mod math;
pub mod replica;
pub mod sse;
