// Minimal ambient types for the optional transformers.js dependency; the
// package is dynamically imported only when a pretrained model is requested.
declare module "@huggingface/transformers" {
  export interface FeatureExtractionOutput {
    data: Float32Array;
  }
  export type FeatureExtractionPipeline = (
    text: string,
    options: { pooling: "mean"; normalize: boolean },
  ) => Promise<FeatureExtractionOutput>;
  export function pipeline(
    task: "feature-extraction",
    model: string,
  ): Promise<FeatureExtractionPipeline>;
}
