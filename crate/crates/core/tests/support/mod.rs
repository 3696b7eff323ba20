pub mod ddouble;
