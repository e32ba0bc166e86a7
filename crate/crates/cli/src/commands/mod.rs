pub mod make_fig2;
pub mod oracle;
pub mod prune;
pub mod rank;
pub mod train_toy;
