pub mod error;
pub mod exactnum;
pub mod intlat;
pub mod leinartas;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod poly;
pub mod polyexp;
pub mod precursive;
pub mod semilin;
pub mod skewgeom;
