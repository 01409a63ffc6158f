pub mod bench;
pub mod conflict;
pub mod fixtures;
pub mod constraint;
pub mod highlevel;
pub mod io;
pub mod lowlevel;
pub mod model;
pub mod movingai;
pub mod oracle;
pub mod time;
