#![allow(dead_code)]

pub mod gradcheck;
pub mod naive_net;
pub mod tabular;
