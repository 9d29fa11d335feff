use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{Ball, BallBundle, BallOptions, GeneratingSet, MultiplicationTable};
use crate::group_ring::{GroupRingElement, Laplacian, Scalar};
use crate::numerics::BigRational;

/// Everything needed to write down the Gram-matrix problem on `B_d`.
#[derive(Clone, Debug)]
pub struct SosInstance {
    bundle: BallBundle,
    laplacian: GroupRingElement<BigRational>,
    laplacian_sq: GroupRingElement<BigRational>,
}

/// Generates `B_d`, `B_2d`, the table, and exact `Δ`, `Δ²` on `B_2d`.
pub fn build_instance(generators: &GeneratingSet, radius: u32) -> Result<SosInstance> {
    build_instance_with(generators, radius, &BallOptions::default())
}

pub fn build_instance_with(generators: &GeneratingSet, radius: u32, options: &BallOptions) -> Result<SosInstance> {
    if radius < 1 {
        return Err(Error::InvalidArgument("basis radius must be at least 1".into()));
    }
    SosInstance::from_bundle(BallBundle::generate(generators, radius, options)?)
}

impl SosInstance {
    pub fn from_bundle(bundle: BallBundle) -> Result<SosInstance> {
        if bundle.basis.radius() < 1 {
            return Err(Error::InvalidArgument("basis radius must be at least 1".into()));
        }
        let generators = bundle.basis.generators().clone();
        let on_basis = Laplacian::on_ball(&generators, bundle.basis.clone())?.element::<BigRational>();
        let laplacian = on_basis.embed(&bundle.product)?;
        let laplacian_sq = on_basis.convolve_table(&on_basis, &bundle.table, &bundle.product)?;
        let zero = <BigRational as Scalar>::zero();
        if laplacian.augmentation() != zero || laplacian_sq.augmentation() != zero {
            return Err(Error::Numerical("Laplacian is not in the augmentation ideal".into()));
        }
        Ok(SosInstance { bundle, laplacian, laplacian_sq })
    }

    pub fn generators(&self) -> &GeneratingSet {
        self.bundle.basis.generators()
    }

    pub fn radius(&self) -> u32 {
        self.bundle.basis.radius()
    }

    pub fn basis(&self) -> &Arc<Ball> {
        &self.bundle.basis
    }

    pub fn product(&self) -> &Arc<Ball> {
        &self.bundle.product
    }

    pub fn table(&self) -> &MultiplicationTable {
        &self.bundle.table
    }

    pub fn bundle(&self) -> &BallBundle {
        &self.bundle
    }

    /// `Δ` laid out on the product ball.
    pub fn laplacian(&self) -> &GroupRingElement<BigRational> {
        &self.laplacian
    }

    /// `Δ²` laid out on the product ball.
    pub fn laplacian_squared(&self) -> &GroupRingElement<BigRational> {
        &self.laplacian_sq
    }

    /// `Δ` restricted to the basis ball (the basis contains `B_1`).
    pub fn laplacian_on_basis(&self) -> Result<GroupRingElement<BigRational>> {
        Ok(Laplacian::on_ball(self.generators(), self.basis().clone())?.element())
    }

    /// Human-readable group label, e.g. `SL(3, Z)`.
    pub fn group_label(&self) -> String {
        format!("SL({}, {})", self.generators().dim(), self.generators().ring())
    }

    /// SHA-256 over the ids of both balls (which cover generators and ordering).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.basis().id().as_bytes());
        h.update(b"|");
        h.update(self.product().id().as_bytes());
        crate::group::hex_digest(&h.finalize())
    }
}
