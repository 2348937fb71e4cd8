#![allow(dead_code)]

pub mod geom;
pub mod micro;
pub mod reference;
