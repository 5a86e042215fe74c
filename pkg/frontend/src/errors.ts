/** Error vocabulary shared by the CSV reader, the rate fit, and the renderer. */

export class MissingColumn extends Error {
  constructor(column: string, path?: string) {
    super(path ? `column "${column}" not found in ${path}` :
                 `column "${column}" not found`);
    this.name = "MissingColumn";
  }
}

/** No plottable data: an empty CSV, or a requested variant with no rows. */
export class EmptySeries extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EmptySeries";
  }
}

export class TooFewPoints extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TooFewPoints";
  }
}

export class NonPositive extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NonPositive";
  }
}
