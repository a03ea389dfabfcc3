//! Page-load simulation for studying HTTP/2 server push.
//!
//! A page is a [`page::DependencyTree`] of resources discovered while
//! parsing their parents. [`sim::simulate`] loads it over a
//! [`net::LinkParams`] link with or without push, [`bounds`] gives the
//! closed-form limits, and [`experiment`] sweeps grids and summarizes them
//! with [`stats`].

pub mod bounds;
pub mod experiment;
pub mod net;
pub mod page;
pub mod push;
pub mod sim;
pub mod stats;
pub mod synth;
