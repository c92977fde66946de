pub mod cases;
pub mod checks;
pub mod oracles;
